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

#include "histoseg/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "histoseg/errors.hpp"
#include "histoseg/image_io.hpp"

namespace histoseg {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kModule = "dataset_explorer";

std::set<std::string> stems_with_extension(const fs::path& dir, std::string_view ext) {
  std::set<std::string> stems;
  if (!fs::is_directory(dir)) return stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      stems.insert(entry.path().stem().string());
    }
  }
  return stems;
}

}  // namespace

std::vector<SampleFiles> list_samples(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw Error(kModule, ErrorCode::EmptyDataset, "dataset root " + root.string() + " is not a directory");
  }
  const auto images = stems_with_extension(root / "images", ".png");
  const auto masks = stems_with_extension(root / "masks", ".png");
  for (const auto& id : images) {
    if (!masks.contains(id)) {
      throw Error(kModule, ErrorCode::MismatchedPair, "sample '" + id + "' has an image but no mask");
    }
  }
  for (const auto& id : masks) {
    if (!images.contains(id)) {
      throw Error(kModule, ErrorCode::MismatchedPair, "sample '" + id + "' has a mask but no image");
    }
  }
  if (images.empty()) {
    throw Error(kModule, ErrorCode::EmptyDataset, "no image/mask pairs under " + root.string());
  }

  std::vector<SampleFiles> out;
  for (const auto& id : images) {
    SampleFiles files{id, root / "images" / (id + ".png"), root / "masks" / (id + ".png"), std::nullopt};
    const fs::path loc = root / "localization" / (id + ".csv");
    if (fs::is_regular_file(loc)) files.localization = loc;
    out.push_back(std::move(files));
  }
  return out;
}

TileSample load_sample(const SampleFiles& files, const LocalizationColumns& columns) {
  TileSample sample;
  sample.id = files.id;
  sample.image = read_png(files.image, 3);
  sample.mask = RawMask::from_interleaved(read_png(files.mask, 3));
  if (files.localization) {
    sample.records = load_localization(*files.localization, columns);
    validate_record_bounds(sample.records, sample.mask.width(), sample.mask.height());
  }
  return sample;
}

}  // namespace histoseg
