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
#include <ostream>

#include "histoseg/config.hpp"

namespace histoseg {

/// Artifact locations under the configured output directory.
struct OutputLayout {
  std::filesystem::path root;

  std::filesystem::path summary() const { return root / "summary.json"; }
  std::filesystem::path split() const { return root / "split.json"; }
  std::filesystem::path prepared(DatasetVariant v) const {
    return root / "prepared" / std::string(variant_name(v));
  }
  std::filesystem::path model() const { return root / "model"; }
  std::filesystem::path results() const { return root / "results.csv"; }
  std::filesystem::path predictions() const { return root / "predictions"; }
  std::filesystem::path report() const { return root / "report"; }
};

/// Writes summary.json and split.json.
void run_explore(const PipelineConfig& config, std::ostream& log);
/// Writes prepared/<variant>/<id>.hsp plus roles.json for every configured variant.
void run_prepare(const PipelineConfig& config, std::ostream& log);
/// Writes model/best.ckpt, model/last.ckpt and model/train_log.csv.
void run_train(const PipelineConfig& config, std::ostream& log);
/// Writes results.csv and predictions/<id>.png (label per pixel).
void run_evaluate(const PipelineConfig& config, std::ostream& log);
/// Writes report/boxplot_<metric>.svg, report/overlay_<id>.png and report/results.csv.
void run_report(const PipelineConfig& config, std::ostream& log);
/// Writes the synthetic dataset and its superclass table.
void run_make_fixture(const PipelineConfig& config, std::ostream& log);

}  // namespace histoseg
