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

#include "histoseg/raster.hpp"

namespace histoseg {

/// Reads an 8-bit PNG converted to `channels` (1 = gray, 3 = RGB).
ByteRaster read_png(const std::filesystem::path& path, int channels);

/// Writes an 8-bit gray (1 channel) or RGB (3 channel) PNG. Output bytes are
/// a pure function of the raster.
void write_png(const std::filesystem::path& path, const ByteRaster& image);

}  // namespace histoseg
