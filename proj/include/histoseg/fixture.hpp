// Copyright 2026 The histoseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>

namespace histoseg {

struct FixtureConfig {
  int samples = 8;
  int multi_samples = 2;
  int side = 32;
  std::uint64_t seed = 1;
};

/// Writes a synthetic dataset: textured pinkish tiles with ellipse "nuclei" of
/// five raw classes (tumor, fibroblast, lymphocyte, plasma_cell and an
/// unmapped macrophage class), about a third annotated as axis-aligned boxes,
/// the rest as polygons. Some tiles are a few pixels larger than their masks
/// and some masks are smaller than `side`. Also writes the matching superclass
/// table. `multi_root` may be empty to skip the multi-rater set.
void write_fixture(const FixtureConfig& config, const std::filesystem::path& single_root,
                   const std::filesystem::path& multi_root,
                   const std::filesystem::path& table_path);

}  // namespace histoseg
