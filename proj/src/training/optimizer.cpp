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

#include "mergemix/training/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "mergemix/error.hpp"

namespace mergemix::training {

AdamState AdamState::zeros_like(const models::ModelParams& params) {
  AdamState s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m.emplace_back(params.value(i).shape());
    s.v.emplace_back(params.value(i).shape());
  }
  return s;
}

void adamw_step(models::ModelParams& params, const std::vector<nx::Tensor>& grads, AdamState& state,
                const AdamWConfig& cfg, double lr) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adamw: " + std::to_string(grads.size()) + " grads for " + std::to_string(params.size()) +
                     " params");
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    nx::Tensor& p = params.value(i);
    const nx::Tensor& g = grads[i];
    if (g.shape() != p.shape()) throw ShapeError("adamw: gradient shape mismatch for " + params.name(i));
    const double decay = p.rank() >= 2 ? lr * cfg.weight_decay : 0.0;
    auto m = state.m[i].data(), v = state.v[i].data();
    auto pd = p.data();
    for (std::size_t k = 0; k < pd.size(); ++k) {
      pd[k] -= decay * pd[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      pd[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

double lr_at(std::size_t step, std::size_t total, double base_lr, double warmup_fraction) {
  if (total == 0) return base_lr;
  const auto warmup = static_cast<std::size_t>(std::lround(warmup_fraction * static_cast<double>(total)));
  if (step < warmup) return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total <= warmup) return base_lr;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace mergemix::training
