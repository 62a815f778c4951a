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

#include "histoseg/dataset_explorer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "histoseg/dataset.hpp"
#include "histoseg/errors.hpp"
#include "histoseg/image_io.hpp"
#include "histoseg/parallel.hpp"
#include "histoseg/rng.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "dataset_explorer";

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

DatasetSummary summarize(std::span<const MaskStats> stats) {
  if (stats.empty()) throw Error(kModule, ErrorCode::EmptyDataset, "no samples to summarize");
  DatasetSummary s;
  s.n_samples = stats.size();
  std::uint64_t sum_h = 0;
  std::uint64_t sum_w = 0;
  std::array<std::uint64_t, kSuperclassCount> pixels{};
  for (const auto& m : stats) {
    sum_h += static_cast<std::uint64_t>(m.height);
    sum_w += static_cast<std::uint64_t>(m.width);
    s.max_height = std::max(s.max_height, m.height);
    s.max_width = std::max(s.max_width, m.width);
    for (int c = 0; c < kSuperclassCount; ++c) pixels[c] += m.class_pixels[c];
  }
  s.mean_height = static_cast<double>(sum_h) / static_cast<double>(stats.size());
  s.mean_width = static_cast<double>(sum_w) / static_cast<double>(stats.size());
  const std::uint64_t total = std::accumulate(pixels.begin(), pixels.end(), std::uint64_t{0});
  for (int c = 0; c < kSuperclassCount; ++c) {
    s.class_pixel_fractions[c] = static_cast<double>(pixels[c]) / static_cast<double>(total);
  }
  return s;
}

DatasetSummary scan_dataset(const std::filesystem::path& root, const SuperclassTable& table) {
  const auto files = list_samples(root);
  std::vector<MaskStats> stats(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    const auto mask = RawMask::from_interleaved(read_png(files[i].mask, 3));
    const auto classes = decode_class_map(mask, table);
    MaskStats& m = stats[i];
    m.height = classes.height();
    m.width = classes.width();
    for (Superclass label : classes.data()) ++m.class_pixels[static_cast<int>(label)];
  });
  return summarize(stats);
}

TargetShape compute_target_shape(const DatasetSummary& summary, int divisor) {
  if (!is_power_of_two(divisor) || divisor < 2) {
    throw Error(kModule, ErrorCode::BadConfig,
                "divisor must be a power of two >= 2, got " + std::to_string(divisor));
  }
  const int smallest = std::min(summary.max_height, summary.max_width);
  if (smallest < divisor) {
    throw Error(kModule, ErrorCode::TooSmall,
                "largest tile side " + std::to_string(smallest) + " is below divisor " +
                    std::to_string(divisor));
  }
  return TargetShape{(smallest / divisor) * divisor, divisor};
}

std::size_t ratio_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

SplitIndex make_split(std::span<const std::string> ids, std::array<double, 3> ratios,
                      std::uint64_t seed) {
  if (ids.empty()) throw Error(kModule, ErrorCode::EmptyIds, "cannot split an empty id list");
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9 ||
      std::any_of(ratios.begin(), ratios.end(), [](double r) { return !(r >= 0.0 && r <= 1.0); })) {
    throw Error(kModule, ErrorCode::BadRatios, "split ratios must be in [0,1] and sum to 1");
  }

  std::vector<std::string> order(ids.begin(), ids.end());
  SplitMix64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }

  const std::size_t n = order.size();
  const std::size_t n_val = ratio_count(ratios[1], n);
  const std::size_t n_eval = ratio_count(ratios[2], n);
  const std::size_t n_train = n - n_val - n_eval;

  SplitIndex split;
  split.seed = seed;
  split.ratios = ratios;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.eval.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return split;
}

std::string summary_to_json(const DatasetSummary& s) {
  nlohmann::ordered_json j;
  j["n_samples"] = s.n_samples;
  j["mean_height"] = s.mean_height;
  j["mean_width"] = s.mean_width;
  j["max_height"] = s.max_height;
  j["max_width"] = s.max_width;
  nlohmann::ordered_json fractions;
  for (Superclass cls : kAllSuperclasses) {
    fractions[std::string(superclass_name(cls))] = s.class_pixel_fractions[static_cast<int>(cls)];
  }
  j["class_pixel_fractions"] = fractions;
  return j.dump(2) + "\n";
}

DatasetSummary summary_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    DatasetSummary s;
    s.n_samples = j.at("n_samples").get<std::size_t>();
    s.mean_height = j.at("mean_height").get<double>();
    s.mean_width = j.at("mean_width").get<double>();
    s.max_height = j.at("max_height").get<int>();
    s.max_width = j.at("max_width").get<int>();
    for (Superclass cls : kAllSuperclasses) {
      s.class_pixel_fractions[static_cast<int>(cls)] =
          j.at("class_pixel_fractions").at(std::string(superclass_name(cls))).get<double>();
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(kModule, ErrorCode::ParseError, std::string("summary.json: ") + e.what());
  }
}

std::string split_to_json(const SplitIndex& split) {
  nlohmann::ordered_json j;
  j["train"] = split.train;
  j["val"] = split.val;
  j["eval"] = split.eval;
  j["seed"] = split.seed;
  j["ratios"] = split.ratios;
  return j.dump(2) + "\n";
}

SplitIndex split_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SplitIndex split;
    split.train = j.at("train").get<std::vector<std::string>>();
    split.val = j.at("val").get<std::vector<std::string>>();
    split.eval = j.at("eval").get<std::vector<std::string>>();
    split.seed = j.at("seed").get<std::uint64_t>();
    split.ratios = j.at("ratios").get<std::array<double, 3>>();
    return split;
  } catch (const nlohmann::json::exception& e) {
    throw Error(kModule, ErrorCode::ParseError, std::string("split.json: ") + e.what());
  }
}

}  // namespace histoseg
