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
#include <functional>
#include <vector>

#include "mergemix/numerics/tape.hpp"

namespace mergemix::nx {

/// Builds a scalar loss on `tape` from leaves created for `params`.
using ScalarFn = std::function<Var(Tape& tape, const std::vector<Var>& params)>;

/// (parameter index, flat element index)
struct Coord {
  std::size_t param;
  std::size_t index;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

/// Relative error used throughout: |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Compares reverse-mode gradients against central differences with step h
/// at the given coordinates (all coordinates when `coords` is empty).
GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> params, double h = 1e-5,
                           const std::vector<Coord>& coords = {});

/// Single-tensor convenience form.
double grad_check(const std::function<Var(Var)>& f, const Tensor& x, double h = 1e-5);

}  // namespace mergemix::nx
