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

#include "mergemix/io/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mergemix/error.hpp"

namespace mergemix::io {
namespace {

constexpr double kLeft = 56, kRight = 16, kTop = 32, kBottom = 44;
constexpr std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  PlotSpec spec;
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (spec.width - kLeft - kRight); }
  double py(double y) const { return spec.height - kBottom - (y - y0) / (y1 - y0) * (spec.height - kTop - kBottom); }
};

std::string open(const Frame& f) {
  const auto& s = f.spec;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(s.width) + "\" height=\"" +
                    num(s.height) + "\" viewBox=\"0 0 " + num(s.width) + " " + num(s.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(s.width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(s.title) + "</text>\n";
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(f.py(f.y0)) + "\" x2=\"" + num(s.width - kRight) +
         "\" y2=\"" + num(f.py(f.y0)) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(f.py(f.y0)) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kTop) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
    out += "<text x=\"" + num(kLeft - 4) + "\" y=\"" + num(f.py(v) + 4) +
           "\" text-anchor=\"end\" font-size=\"10\">" + tick(v) + "</text>\n";
  }
  out += "<text x=\"" + num(s.width / 2) + "\" y=\"" + num(s.height - 8) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + escape(s.x_label) + "</text>\n";
  out += "<text x=\"14\" y=\"" + num(s.height / 2) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " +
         num(s.height / 2) + ")\">" + escape(s.y_label) + "</text>\n";
  return out;
}

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

}  // namespace

std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("line_plot: x/y length mismatch in " + s.label);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{spec, x0, x1, y0, y1};
  std::string out = open(f);
  for (int i = 0; i <= 4; ++i) {
    const double v = x0 + (x1 - x0) * i / 4.0;
    out += "<text x=\"" + num(f.px(v)) + "\" y=\"" + num(spec.height - kBottom + 14) +
           "\" text-anchor=\"middle\" font-size=\"10\">" + tick(v) + "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % kColors.size()];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts += (pts.empty() ? "" : " ") + num(f.px(s.x[i])) + "," + num(f.py(s.y[i]));
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
           "\"/>\n";
    out += "<text x=\"" + num(spec.width - kRight - 4) + "\" y=\"" + num(kTop + 12 + 14.0 * k) +
           "\" text-anchor=\"end\" font-size=\"11\" fill=\"" + color + "\">" + escape(s.label) + "</text>\n";
  }
  return out + "</svg>\n";
}

std::string bar_plot(const PlotSpec& spec, const std::vector<std::string>& labels, const std::vector<double>& values,
                     const std::vector<double>& reference) {
  if (labels.size() != values.size()) throw ShapeError("bar_plot: label/value length mismatch");
  if (!reference.empty() && reference.size() != values.size()) throw ShapeError("bar_plot: reference length mismatch");
  double y1 = 0;
  for (double v : values) y1 = std::max(y1, v);
  for (double v : reference) y1 = std::max(y1, v);
  if (y1 <= 0) y1 = 1;
  const double n = static_cast<double>(std::max<std::size_t>(values.size(), 1));
  const Frame f{spec, 0, n, 0, y1};
  std::string out = open(f);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double left = f.px(i + 0.1), right = f.px(i + 0.9);
    out += "<rect x=\"" + num(left) + "\" y=\"" + num(f.py(values[i])) + "\" width=\"" + num(right - left) +
           "\" height=\"" + num(f.py(0) - f.py(values[i])) + "\" fill=\"" + kColors[0] + "\"/>\n";
    if (!reference.empty()) {
      out += "<line x1=\"" + num(left) + "\" y1=\"" + num(f.py(reference[i])) + "\" x2=\"" + num(right) +
             "\" y2=\"" + num(f.py(reference[i])) + "\" stroke=\"" + kColors[1] +
             "\" stroke-dasharray=\"4 2\" stroke-width=\"1.5\"/>\n";
    }
    if (values.size() <= 20) {
      out += "<text x=\"" + num(f.px(i + 0.5)) + "\" y=\"" + num(spec.height - kBottom + 14) +
             "\" text-anchor=\"middle\" font-size=\"9\">" + escape(labels[i]) + "</text>\n";
    }
  }
  return out + "</svg>\n";
}

}  // namespace mergemix::io
