// Copyright 2026 The MergeMix Lab Authors.
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

#include <string>
#include <vector>

namespace mergemix::io {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  double width = 480, height = 320;
};

/// Deterministic output: the same inputs always produce byte-identical SVG.
std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series);
/// One bar per (label, value); a non-empty `reference` adds a dashed marker
/// at each bar's expected value (reliability diagrams).
std::string bar_plot(const PlotSpec& spec, const std::vector<std::string>& labels,
                     const std::vector<double>& values, const std::vector<double>& reference = {});

}  // namespace mergemix::io
