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
#include <string>

#include "mergemix/models/params.hpp"
#include "mergemix/numerics/ops.hpp"
#include "mergemix/tome/attention.hpp"

namespace mergemix::models {

inline constexpr double kInitStd = 0.02;

// Parameter groups. Names are `<name>.g/.b` for LayerNorm, `<name>.wq` ...
// `<name>.bo` (no `.bk`) for attention and `<name>.w1/.b1/.w2/.b2` for the MLP.
void add_layernorm(ModelParams& params, const std::string& name, std::size_t dim);
void add_attention(ModelParams& params, const std::string& name, std::size_t dim, data::Rng& rng);
void add_mlp(ModelParams& params, const std::string& name, std::size_t dim, std::size_t hidden,
             data::Rng& rng);

nx::Var layernorm(const Bound& p, const std::string& name, nx::Var x);
tome::AttentionWeights attention_weights(const Bound& p, const std::string& name, std::size_t heads);
nx::Var mlp(const Bound& p, const std::string& name, nx::Var x);

/// [n x D] repeated `times` times vertically.
nx::Var tile_rows(nx::Var x, std::size_t times);
/// Rows of `table` selected by `ids`.
nx::Var gather_rows(nx::Var table, std::span<const std::size_t> ids);

}  // namespace mergemix::models
