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
#include <vector>

#include "mergemix/models/params.hpp"

namespace mergemix::training {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

struct AdamState {
  std::vector<nx::Tensor> m, v;
  std::size_t t = 0;  // completed steps

  static AdamState zeros_like(const models::ModelParams& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Decoupled weight decay (p -= lr * wd * p, before the Adam update) on
/// tensors of rank >= 2; vectors (biases, norm gains) are not decayed.
/// Throws ShapeError if grads or state do not match params.
void adamw_step(models::ModelParams& params, const std::vector<nx::Tensor>& grads, AdamState& state,
                const AdamWConfig& cfg, double lr);

/// Linear warmup over round(warmup_fraction * total) steps, then cosine decay
/// to zero at `total`.
double lr_at(std::size_t step, std::size_t total, double base_lr, double warmup_fraction);

}  // namespace mergemix::training
