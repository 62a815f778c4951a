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

#include "histoseg/reporter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "histoseg/errors.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "reporter";

double quantile(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string fmt(const char* pattern, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

constexpr std::array<const char*, kSuperclassCount> kBoxColours = {"#9e9e9e", "#d62728", "#2ca02c",
                                                                   "#1f77b4"};

// Figure geometry (pixels).
constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;

// Scores are drawn x100; mcc gets a symmetric axis because it can be negative.
struct Axis {
  double lo = 0.0;
  double y(double score) const {
    return kTop + (kHeight - kTop - kBottom) * (100.0 - score) / (100.0 - lo);
  }
};

std::string render_one(std::string_view metric, std::size_t column, const ResultsTable& table) {
  std::vector<std::pair<Superclass, std::vector<double>>> groups;
  for (Superclass cls : kAllSuperclasses) {
    std::vector<double> values;
    for (const auto& row : table.rows) {
      if (row.cls == superclass_name(cls)) values.push_back(row.values[column] * 100.0);
    }
    if (!values.empty()) groups.emplace_back(cls, std::move(values));
  }
  if (groups.empty()) throw Error(kModule, ErrorCode::EmptyResults, "no rows for known classes");

  const Axis axis{metric == "mcc" ? -100.0 : 0.0};
  auto y_of = [&](double score) { return axis.y(score); };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
  svg += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         std::string(metric) + " per class</text>\n";

  for (int tick = static_cast<int>(axis.lo); tick <= 100; tick += axis.lo < 0 ? 50 : 20) {
    const std::string y = fmt("%.2f", y_of(tick));
    svg += "<line x1=\"" + fmt("%.2f", kLeft) + "\" y1=\"" + y + "\" x2=\"" + fmt("%.2f", kWidth - kRight) +
           "\" y2=\"" + y + "\" stroke=\"#e0e0e0\"/>\n";
    svg += "<text x=\"" + fmt("%.2f", kLeft - 8) + "\" y=\"" + y +
           "\" text-anchor=\"end\" dominant-baseline=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
           std::to_string(tick) + "</text>\n";
  }
  svg += "<line x1=\"" + fmt("%.2f", kLeft) + "\" y1=\"" + fmt("%.2f", y_of(axis.lo)) + "\" x2=\"" +
         fmt("%.2f", kLeft) + "\" y2=\"" + fmt("%.2f", y_of(100)) + "\" stroke=\"black\"/>\n";

  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(groups.size());
  const double box_w = std::min(60.0, slot * 0.5);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& [cls, values] = groups[g];
    const BoxplotSummary s = boxplot_summary(values);
    const double cx = kLeft + slot * (static_cast<double>(g) + 0.5);
    const std::string colour = kBoxColours[static_cast<int>(cls)];
    const std::string x0 = fmt("%.2f", cx - box_w / 2), x1 = fmt("%.2f", cx + box_w / 2);
    const std::string xc = fmt("%.2f", cx);

    svg += "<g class=\"box\" data-class=\"" + std::string(superclass_name(cls)) + "\">\n";
    svg += "<line x1=\"" + xc + "\" y1=\"" + fmt("%.2f", y_of(s.whisker_high)) + "\" x2=\"" + xc +
           "\" y2=\"" + fmt("%.2f", y_of(s.q3)) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + xc + "\" y1=\"" + fmt("%.2f", y_of(s.q1)) + "\" x2=\"" + xc + "\" y2=\"" +
           fmt("%.2f", y_of(s.whisker_low)) + "\" stroke=\"black\"/>\n";
    for (double w : {s.whisker_low, s.whisker_high}) {
      svg += "<line x1=\"" + fmt("%.2f", cx - box_w / 4) + "\" y1=\"" + fmt("%.2f", y_of(w)) +
             "\" x2=\"" + fmt("%.2f", cx + box_w / 4) + "\" y2=\"" + fmt("%.2f", y_of(w)) +
             "\" stroke=\"black\"/>\n";
    }
    svg += "<rect x=\"" + x0 + "\" y=\"" + fmt("%.2f", y_of(s.q3)) + "\" width=\"" + fmt("%.2f", box_w) +
           "\" height=\"" + fmt("%.2f", y_of(s.q1) - y_of(s.q3)) + "\" fill=\"" + colour +
           "\" fill-opacity=\"0.6\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + x0 + "\" y1=\"" + fmt("%.2f", y_of(s.median)) + "\" x2=\"" + x1 + "\" y2=\"" +
           fmt("%.2f", y_of(s.median)) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    svg += "<path d=\"M " + fmt("%.2f", cx - 4) + " " + fmt("%.2f", y_of(s.mean)) + " L " + xc + " " +
           fmt("%.2f", y_of(s.mean) - 4) + " L " + fmt("%.2f", cx + 4) + " " + fmt("%.2f", y_of(s.mean)) +
           " L " + xc + " " + fmt("%.2f", y_of(s.mean) + 4) + " Z\" fill=\"white\" stroke=\"black\"/>\n";
    for (double o : s.outliers) {
      svg += "<circle cx=\"" + xc + "\" cy=\"" + fmt("%.2f", y_of(o)) +
             "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
    }
    svg += "<text x=\"" + xc + "\" y=\"" + fmt("%.2f", kHeight - kBottom + 20) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
           std::string(superclass_name(cls)) + "</text>\n";
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

BoxplotSummary boxplot_summary(std::span<const double> values) {
  if (values.empty()) throw Error(kModule, ErrorCode::EmptyValues, "boxplot of no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  BoxplotSummary s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile(sorted, 0.25);
  s.median = quantile(sorted, 0.5);
  s.q3 = quantile(sorted, 0.75);
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = s.max;
  s.whisker_high = s.min;
  for (double v : sorted) {
    if (v < lo_fence || v > hi_fence) {
      s.outliers.push_back(v);
    } else {
      s.whisker_low = std::min(s.whisker_low, v);
      s.whisker_high = std::max(s.whisker_high, v);
    }
  }
  return s;
}

std::map<std::string, std::string> render_boxplots(const ResultsTable& table,
                                                   std::span<const std::string_view> metrics) {
  if (table.rows.empty()) throw Error(kModule, ErrorCode::EmptyResults, "results table has no rows");
  std::map<std::string, std::string> out;
  for (auto metric : metrics) {
    const std::size_t column = table.metric_index(metric);
    if (column == static_cast<std::size_t>(-1)) {
      throw Error(kModule, ErrorCode::MissingMetric, "results table lacks metric '" + std::string(metric) + "'");
    }
    out[std::string(metric)] = render_one(metric, column, table);
  }
  return out;
}

RgbImage render_overlay(const RgbImage& tile, const ClassMap& pred, double alpha) {
  if (!tile.same_spatial_shape(pred) || tile.channels() != 3) {
    throw Error(kModule, ErrorCode::ShapeMismatch, "overlay needs an RGB tile shaped like the prediction");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(kModule, ErrorCode::BadConfig, "overlay alpha must lie in [0,1]");
  }
  static constexpr std::array<std::array<double, 3>, kSuperclassCount> kPalette = {{
      {0, 0, 0}, {255, 0, 0}, {0, 255, 0}, {0, 0, 255}}};
  RgbImage out = tile;
  for (int y = 0; y < tile.height(); ++y) {
    for (int x = 0; x < tile.width(); ++x) {
      const Superclass cls = pred.at(y, x);
      if (cls == Superclass::Fov) continue;
      const auto& colour = kPalette[static_cast<int>(cls)];
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - alpha) * tile.at(y, x, c) + alpha * colour[c];
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

}  // namespace histoseg
