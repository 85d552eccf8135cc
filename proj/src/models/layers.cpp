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

#include "mergemix/models/layers.hpp"

#include <string_view>

namespace mergemix::models {

void add_layernorm(ModelParams& params, const std::string& name, std::size_t dim) {
  params.add(name + ".g", nx::Tensor({dim}, 1.0));
  params.add(name + ".b", nx::Tensor({dim}));
}

void add_attention(ModelParams& params, const std::string& name, std::size_t dim, data::Rng& rng) {
  // No key bias: it cannot change the attention weights.
  for (const char* m : {"q", "k", "v", "o"}) {
    params.add(name + ".w" + m, trunc_normal({dim, dim}, kInitStd, rng));
    if (std::string_view(m) != "k") params.add(name + ".b" + m, nx::Tensor({dim}));
  }
}

void add_mlp(ModelParams& params, const std::string& name, std::size_t dim, std::size_t hidden,
             data::Rng& rng) {
  params.add(name + ".w1", trunc_normal({dim, hidden}, kInitStd, rng));
  params.add(name + ".b1", nx::Tensor({hidden}));
  params.add(name + ".w2", trunc_normal({hidden, dim}, kInitStd, rng));
  params.add(name + ".b2", nx::Tensor({dim}));
}

nx::Var layernorm(const Bound& p, const std::string& name, nx::Var x) {
  return nx::layernorm(x, p[name + ".g"], p[name + ".b"]);
}

tome::AttentionWeights attention_weights(const Bound& p, const std::string& name, std::size_t heads) {
  return {p[name + ".wq"], p[name + ".bq"], p[name + ".wk"], nx::Var{},
          p[name + ".wv"], p[name + ".bv"], p[name + ".wo"], p[name + ".bo"], heads};
}

nx::Var mlp(const Bound& p, const std::string& name, nx::Var x) {
  nx::Var h = nx::gelu(nx::linear(x, p[name + ".w1"], p[name + ".b1"]));
  return nx::linear(h, p[name + ".w2"], p[name + ".b2"]);
}

nx::Var tile_rows(nx::Var x, std::size_t times) {
  const std::size_t n = x.value().rows();
  nx::RowMix mix;
  for (std::size_t t = 0; t < times; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      mix.add(i, 1.0);
      mix.end_row();
    }
  }
  return nx::combine_rows(x, mix);
}

nx::Var gather_rows(nx::Var table, std::span<const std::size_t> ids) {
  nx::RowMix mix;
  for (std::size_t id : ids) {
    mix.add(id, 1.0);
    mix.end_row();
  }
  return nx::combine_rows(table, mix);
}

}  // namespace mergemix::models
