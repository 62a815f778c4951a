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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "histoseg/augmentor.hpp"
#include "histoseg/fixture.hpp"
#include "histoseg/mask_codec.hpp"
#include "histoseg/preprocessor.hpp"
#include "histoseg/trainer.hpp"
#include "histoseg/unet.hpp"

namespace histoseg {

/// INI document: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. Keys are addressed as "section.key".
class IniDocument {
 public:
  static IniDocument parse(std::string_view text, std::string_view source = "<config>");
  /// Throws ConfigError when the file cannot be read.
  static IniDocument load(const std::filesystem::path& path);

  /// Applies an override of the form "section.key=value".
  void apply_override(std::string_view assignment);
  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  const std::string* find(std::string_view key) const;
  const std::map<std::string, std::string, std::less<>>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Everything a pipeline run needs. Defaults reproduce the reference
/// training schedule; relative paths resolve against the config file's
/// directory.
struct PipelineConfig {
  // [data]
  std::filesystem::path root;
  std::filesystem::path multi_root;
  std::filesystem::path output = "out";
  std::filesystem::path superclass_table;
  DatasetVariant variant = DatasetVariant::SingleRater;
  std::vector<DatasetVariant> prepare_variants = {DatasetVariant::SingleRater,
                                                  DatasetVariant::SingleRaterNoBBox,
                                                  DatasetVariant::CombinedMultiRaterEval};
  CropAnchor crop_anchor = CropAnchor::TopLeft;
  // [localization]
  LocalizationColumns columns;
  // [split]
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  std::uint64_t split_seed = 7;
  // [explore]
  int divisor = 32;
  // [augment]
  bool augment_enabled = true;
  AugmentConfig augment;
  // [network]
  NetworkConfig network;
  std::uint64_t network_seed = 1;
  // [train]
  TrainConfig train;
  // [metrics]
  std::vector<Superclass> metric_classes = {kAllSuperclasses.begin(), kAllSuperclasses.end()};
  // [report]
  double overlay_alpha = 0.4;
  int overlay_count = 4;
  // [fixture]
  FixtureConfig fixture;
};

/// Throws ConfigError naming the offending "section.key".
PipelineConfig parse_pipeline_config(const IniDocument& doc, const std::filesystem::path& base_dir);

/// Loads the file, applies overrides and parses.
PipelineConfig load_pipeline_config(const std::filesystem::path& path,
                                    const std::vector<std::string>& overrides = {});

}  // namespace histoseg
