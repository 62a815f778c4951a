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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "histoseg/mask_codec.hpp"
#include "histoseg/metrics.hpp"
#include "histoseg/raster.hpp"

namespace histoseg {

struct BoxplotSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;   // smallest value >= q1 - 1.5 IQR
  double whisker_high = 0.0;  // largest value <= q3 + 1.5 IQR
  double mean = 0.0;
  std::vector<double> outliers;  // ascending
};

/// Linear-interpolation quantiles: q(p) sits at position p (n - 1) of the
/// sorted values. Throws EmptyValues.
BoxplotSummary boxplot_summary(std::span<const double> values);

inline constexpr std::array<std::string_view, 5> kDefaultFigureMetrics = kMetricNames;

/// One SVG per metric (key = metric name), one box per class in superclass id
/// order, scores drawn x100 on a 0-100 axis (-100-100 for mcc). Throws EmptyResults or MissingMetric.
std::map<std::string, std::string> render_boxplots(
    const ResultsTable& table, std::span<const std::string_view> metrics = kDefaultFigureMetrics);

/// Blends non-FOV pixels: out = (1 - alpha) tile + alpha colour, truncated to
/// an integer. TUMOR red, STROMAL green, STILS blue; FOV passes through.
RgbImage render_overlay(const RgbImage& tile, const ClassMap& pred, double alpha = 0.4);

}  // namespace histoseg
