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

#include "mergemix/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "mergemix/error.hpp"

namespace mergemix::nx {
namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
  return f(tape, leaves).value()[0];
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> params, double h,
                           const std::vector<Coord>& coords) {
  for (Tensor& p : params) p.set_requires_grad(true);

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
    Var loss = f(tape, leaves);
    tape.backward(loss);
    for (const Var& v : leaves) analytic.push_back(tape.grad(v));
  }

  std::vector<Coord> todo = coords;
  if (todo.empty()) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (std::size_t i = 0; i < params[p].size(); ++i) todo.push_back({p, i});
    }
  }

  GradCheckReport report;
  for (const Coord& c : todo) {
    if (c.param >= params.size() || c.index >= params[c.param].size()) {
      throw ShapeError("grad_check: coordinate out of range");
    }
    double& slot = params[c.param][c.index];
    const double saved = slot;
    slot = saved + h;
    const double fp = evaluate(f, params);
    slot = saved - h;
    const double fm = evaluate(f, params);
    slot = saved;
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[c.param][c.index];
    report.max_rel_error = std::max(report.max_rel_error, relative_error(a, numeric));
    report.max_abs_error = std::max(report.max_abs_error, std::abs(a - numeric));
    ++report.checked;
  }
  return report;
}

double grad_check(const std::function<Var(Var)>& f, const Tensor& x, double h) {
  ScalarFn wrapped = [&f](Tape&, const std::vector<Var>& p) { return f(p[0]); };
  return grad_check(wrapped, {x}, h).max_rel_error;
}

}  // namespace mergemix::nx
