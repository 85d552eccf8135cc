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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mergemix/data/dataset.hpp"

namespace mergemix::cli {

struct GenDataOptions {
  std::string out;
  data::ShapesConfig shapes;
  bool captions = false;
};

struct TrainOptions {
  std::string config, out, mode;  // mode: "", "cls" or "pref"
  std::string train_data, test_data;
  std::vector<std::string> overrides;
  bool resume = false;
};

struct MixOptions {
  std::string dataset, checkpoint, config, out_dir;
  std::size_t index_a = 0, index_b = 1;
  double lambda = 0.5;
  std::uint64_t seed = 0;
  std::size_t scale = 1;
};

/// eval, calib and occlusion share these.
struct EvalOptions {
  std::string run, data, checkpoint, out;
  std::optional<std::size_t> bins;
  std::vector<double> ratios;
  std::optional<std::uint64_t> seed;
};

struct FlopsOptions {
  std::string config, preset, schedule;  // schedule: "13" (every layer) or "13,13,..."
  std::optional<std::size_t> r;
};

struct ReportOptions {
  std::string run, data;
};

int gen_data(const GenDataOptions& o);
int train(const TrainOptions& o);
int mix(const MixOptions& o);
int eval(const EvalOptions& o);
int calib(const EvalOptions& o);
int occlusion(const EvalOptions& o);
int flops(const FlopsOptions& o);
int report(const ReportOptions& o);

}  // namespace mergemix::cli
