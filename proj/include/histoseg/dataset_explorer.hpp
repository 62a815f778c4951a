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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "histoseg/mask_codec.hpp"

namespace histoseg {

struct DatasetSummary {
  std::size_t n_samples = 0;
  double mean_height = 0.0;
  double mean_width = 0.0;
  int max_height = 0;
  int max_width = 0;
  /// Indexed by superclass id; sums to 1.
  std::array<double, kSuperclassCount> class_pixel_fractions{};

  friend bool operator==(const DatasetSummary&, const DatasetSummary&) = default;
};

struct SplitIndex {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> eval;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.6, 0.2, 0.2};

  friend bool operator==(const SplitIndex&, const SplitIndex&) = default;
};

/// Square network input side; always a multiple of `divisor`.
struct TargetShape {
  int side = 0;
  int divisor = 32;
};

/// Per-mask statistics gathered by scan_dataset.
struct MaskStats {
  int height = 0;
  int width = 0;
  std::array<std::uint64_t, kSuperclassCount> class_pixels{};
};

/// Aggregates per-mask stats. Integer sums, so order never matters.
DatasetSummary summarize(std::span<const MaskStats> stats);

/// Reads every mask under root (see dataset.hpp for the layout) and
/// summarizes dimensions and superclass pixel shares.
DatasetSummary scan_dataset(const std::filesystem::path& root, const SuperclassTable& table);

/// side = floor(min(max_height, max_width) / divisor) * divisor.
TargetShape compute_target_shape(const DatasetSummary& summary, int divisor = 32);

/// Seeded Fisher-Yates shuffle (SplitMix64, j = below(i + 1) for i from n-1
/// down to 1), then val = floor(ratios[1] n), eval = floor(ratios[2] n),
/// train = the rest.
/// The shuffled order is kept inside each list: train first, then val, then eval.
SplitIndex make_split(std::span<const std::string> ids, std::array<double, 3> ratios,
                      std::uint64_t seed);

/// floor(ratio * n) with a 1e-9 guard so that e.g. 0.29 * 100 yields 29.
std::size_t ratio_count(double ratio, std::size_t n);

std::string summary_to_json(const DatasetSummary& summary);
DatasetSummary summary_from_json(std::string_view text);
std::string split_to_json(const SplitIndex& split);
SplitIndex split_from_json(std::string_view text);

}  // namespace histoseg
