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

#include "histoseg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "histoseg/csv.hpp"
#include "histoseg/errors.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "metrics";
constexpr std::string_view kSummaryMarker = "# summary";

double ratio_or_zero(double num, double den) { return den > 0.0 ? num / den : 0.0; }

std::string format_row(std::string_view id, std::string_view cls, const MetricSet& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%s,%.10f,%.10f,%.10f,%.10f,%.10f\n", csv::escape(id).c_str(),
                std::string(cls).c_str(), m.mcc, m.iou, m.acc, m.auc, m.f1);
  return buf;
}

}  // namespace

double metric_value(const MetricSet& m, std::size_t index) {
  switch (index) {
    case 0: return m.mcc;
    case 1: return m.iou;
    case 2: return m.acc;
    case 3: return m.auc;
    case 4: return m.f1;
    default: throw Error(kModule, ErrorCode::MissingMetric, "metric index out of range");
  }
}

ConfusionMatrix confusion_matrix(const ClassMap& pred, const ClassMap& truth, Superclass cls) {
  if (!pred.same_spatial_shape(truth)) {
    throw Error(kModule, ErrorCode::ShapeMismatch, "prediction and truth differ in shape");
  }
  ConfusionMatrix cm;
  const auto p = pred.data();
  const auto t = truth.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool predicted = p[i] == cls;
    const bool actual = t[i] == cls;
    if (predicted && actual) ++cm.tp;
    else if (predicted) ++cm.fp;
    else if (actual) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

MetricSet compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(kModule, ErrorCode::EmptyMatrix, "confusion matrix is empty");
  const double tp = static_cast<double>(cm.tp);
  const double fp = static_cast<double>(cm.fp);
  const double fn = static_cast<double>(cm.fn);
  const double tn = static_cast<double>(cm.tn);

  MetricSet m;
  const double mcc_den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  m.mcc = mcc_den > 0.0 ? (tp * tn - fp * fn) / std::sqrt(mcc_den) : 0.0;
  m.iou = ratio_or_zero(tp, tp + fp + fn);
  m.acc = (tp + tn) / static_cast<double>(cm.total());
  m.auc = 0.5 * (ratio_or_zero(tp, tp + fn) + ratio_or_zero(tn, tn + fp));
  m.f1 = ratio_or_zero(2.0 * tp, 2.0 * tp + fp + fn);
  return m;
}

bool has_degenerate_score(const ConfusionMatrix& cm) {
  const bool mcc_zero = cm.tp + cm.fp == 0 || cm.tp + cm.fn == 0 || cm.tn + cm.fp == 0 ||
                        cm.tn + cm.fn == 0;
  return mcc_zero || cm.tp + cm.fp + cm.fn == 0;
}

EvaluationReport evaluate_dataset(std::span<const LabeledPrediction> pairs,
                                  std::span<const Superclass> classes) {
  if (pairs.empty()) throw Error(kModule, ErrorCode::EmptyDataset, "no prediction/truth pairs");
  if (classes.empty()) throw Error(kModule, ErrorCode::EmptyDataset, "no classes to evaluate");

  EvaluationReport report;
  std::vector<MetricSet> sums(classes.size());
  for (const auto& pair : pairs) {
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const auto cm = confusion_matrix(pair.pred, pair.truth, classes[k]);
      if (has_degenerate_score(cm)) ++report.degenerate_scores;
      const MetricSet m = compute_metrics(cm);
      report.rows.push_back(SampleScore{pair.sample_id, classes[k], m});
      sums[k].mcc += m.mcc;
      sums[k].iou += m.iou;
      sums[k].acc += m.acc;
      sums[k].auc += m.auc;
      sums[k].f1 += m.f1;
    }
  }
  const double n = static_cast<double>(pairs.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const MetricSet mean{sums[k].mcc / n, sums[k].iou / n, sums[k].acc / n, sums[k].auc / n,
                         sums[k].f1 / n};
    report.class_means.push_back(ClassMean{classes[k], mean});
    report.overall.mcc += mean.mcc;
    report.overall.iou += mean.iou;
    report.overall.acc += mean.acc;
    report.overall.auc += mean.auc;
    report.overall.f1 += mean.f1;
  }
  const double c = static_cast<double>(classes.size());
  report.overall = {report.overall.mcc / c, report.overall.iou / c, report.overall.acc / c,
                    report.overall.auc / c, report.overall.f1 / c};
  return report;
}

std::size_t ResultsTable::metric_index(std::string_view name) const {
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    if (metrics[i] == name) return i;
  }
  return static_cast<std::size_t>(-1);
}

std::string results_to_csv(const EvaluationReport& report) {
  std::string out = "sample_id,class";
  for (auto name : kMetricNames) out += "," + std::string(name);
  out += "\n";
  for (const auto& row : report.rows) out += format_row(row.sample_id, superclass_name(row.cls), row.scores);
  out += std::string(kSummaryMarker) + "\n";
  for (const auto& mean : report.class_means) out += format_row("mean", superclass_name(mean.cls), mean.scores);
  out += format_row("mean", "ALL", report.overall);
  return out;
}

ResultsTable parse_results_csv(std::string_view text) {
  const auto cut = text.find(kSummaryMarker);
  const auto rows = csv::parse(cut == std::string_view::npos ? text : text.substr(0, cut));
  if (rows.empty()) throw Error(kModule, ErrorCode::EmptyResults, "results table has no header");
  const auto& header = rows.front();
  if (header.size() < 2 || header[0] != "sample_id" || header[1] != "class") {
    throw Error(kModule, ErrorCode::ParseError, "results header must start with sample_id,class");
  }
  ResultsTable table;
  table.metrics.assign(header.begin() + 2, header.end());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw Error(kModule, ErrorCode::ParseError, "results row " + std::to_string(r) + " has wrong width");
    }
    ResultsTable::Row parsed{row[0], row[1], {}};
    for (std::size_t c = 2; c < row.size(); ++c) {
      try {
        parsed.values.push_back(std::stod(row[c]));
      } catch (const std::exception&) {
        throw Error(kModule, ErrorCode::ParseError, "results row " + std::to_string(r) + ": bad number");
      }
    }
    table.rows.push_back(std::move(parsed));
  }
  return table;
}

}  // namespace histoseg
