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
#include <string_view>
#include <vector>

#include "histoseg/mask_codec.hpp"

namespace histoseg {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MetricSet {
  double mcc = 0.0;
  double iou = 0.0;
  double acc = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
};

inline constexpr std::array<std::string_view, 5> kMetricNames = {"mcc", "iou", "acc", "auc", "f1"};

/// Metric by column index in kMetricNames order.
double metric_value(const MetricSet& m, std::size_t index);

/// One-vs-rest counts for `cls` over every pixel.
ConfusionMatrix confusion_matrix(const ClassMap& pred, const ClassMap& truth, Superclass cls);

/// mcc = (tp tn - fp fn) / sqrt((tp+fp)(tp+fn)(tn+fp)(tn+fn))
/// iou = tp / (tp+fp+fn), f1 = 2tp / (2tp+fp+fn), acc = (tp+tn) / total
/// auc = (tpr + tnr) / 2 at the single hard-label operating point.
/// A zero denominator scores 0 (for auc: the undefined rate counts as 0).
/// Throws EmptyMatrix when total is 0.
MetricSet compute_metrics(const ConfusionMatrix& cm);

/// True when any score of `cm` fell back to the zero-score convention.
bool has_degenerate_score(const ConfusionMatrix& cm);

struct LabeledPrediction {
  std::string sample_id;
  ClassMap pred;
  ClassMap truth;
};

struct SampleScore {
  std::string sample_id;
  Superclass cls = Superclass::Fov;
  MetricSet scores;
};

struct ClassMean {
  Superclass cls = Superclass::Fov;
  MetricSet scores;
};

struct EvaluationReport {
  std::vector<SampleScore> rows;        // sample-major, classes in the given order
  std::vector<ClassMean> class_means;   // mean over samples
  MetricSet overall;                    // mean over class means
  std::size_t degenerate_scores = 0;    // (sample, class) cells using the zero convention
};

EvaluationReport evaluate_dataset(std::span<const LabeledPrediction> pairs,
                                  std::span<const Superclass> classes);

/// Parsed results.csv rows (summary block excluded).
struct ResultsTable {
  struct Row {
    std::string sample_id;
    std::string cls;
    std::vector<double> values;
  };
  std::vector<std::string> metrics;
  std::vector<Row> rows;

  /// Column index of a metric, or npos.
  std::size_t metric_index(std::string_view name) const;
};

/// Header sample_id,class,mcc,iou,acc,auc,f1; one row per (sample, class);
/// then a "# summary" line, one "mean,<CLASS>" row per class and a final
/// "mean,ALL" row. Scores stay in [0,1] (x100 happens only in figures).
std::string results_to_csv(const EvaluationReport& report);
ResultsTable parse_results_csv(std::string_view text);

}  // namespace histoseg
