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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "histoseg/mask_codec.hpp"
#include "histoseg/raster.hpp"

namespace histoseg {

/// On-disk sample layout under a dataset root:
///   images/<id>.png        RGB tile
///   masks/<id>.png         three-channel mask
///   localization/<id>.csv  optional instance records
struct SampleFiles {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path mask;
  std::optional<std::filesystem::path> localization;
};

/// Lists samples sorted by id. Throws EmptyDataset when the root has no
/// pairs, MismatchedPair when an image lacks a mask or the other way round.
std::vector<SampleFiles> list_samples(const std::filesystem::path& root);

struct TileSample {
  std::string id;
  RgbImage image;
  RawMask mask;
  std::vector<LocalizationRecord> records;
};

TileSample load_sample(const SampleFiles& files, const LocalizationColumns& columns = {});

}  // namespace histoseg
