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

#include "mergemix/numerics/ops.hpp"
#include "mergemix/tome/bsm.hpp"
#include "mergemix/tome/source.hpp"
#include "mergemix/tome/token_state.hpp"

namespace mergemix::tome {

struct AttentionWeights {
  nx::Var wq, bq, wk, bk, wv, bv, wo, bo;  // bk may be left invalid
  std::size_t heads = 1;
};

struct AttentionResult {
  nx::Var out;    // [B*Lq x D], before the residual add
  nx::Var keys;   // [B*Lk x D], the matching metric
  nx::Var probs;  // [B*H x Lq x Lk]
};

/// Multi-head attention; queries from `x` [B*Lq x D], keys/values from
/// `memory` [B*Lk x D]. `logit_bias` ([B*H x Lq x Lk], constant) is added
/// before the softmax when non-null.
AttentionResult multi_head_attention(nx::Var x, nx::Var memory, const AttentionWeights& w,
                                     std::size_t batch, std::size_t q_len, std::size_t kv_len,
                                     const nx::Tensor* logit_bias);

/// log(size) of each key (proportional attention), optionally with a causal
/// mask. key_sizes holds batch rows of kv_len entries each.
nx::Tensor attention_bias(const std::vector<std::vector<double>>& key_sizes, std::size_t heads,
                          std::size_t q_len, bool causal);

enum class AttentionStat {
  kReceived,  // mean over heads and queries of attention received by each key
  kClsRow,    // mean over heads of the first query's row
};

/// Per-key saliency of sample b from attention probabilities.
std::vector<double> attention_summary(const nx::Tensor& probs, std::size_t batch,
                                      std::size_t heads, std::size_t b, AttentionStat stat);

/// Plain weights of one attention layer.
struct AttentionLayer {
  nx::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  std::size_t heads = 1;

  static AttentionLayer zeros(std::size_t dim, std::size_t heads);
};

struct ToMeAttentionResult {
  SourceMatrix source;  // original tokens -> rows of z_k
  nx::Tensor a_k;       // per merged token saliency, length K
  TokenState z_k;
  MergePlan plan;
};

/// One attention layer with proportional attention followed by a ToMe merge
/// of r tokens matched on the layer's keys. A_K is the pre-merge attention
/// summary carried onto the merged groups by size-weighted mean.
ToMeAttentionResult tome_attention(const TokenState& state, std::size_t r,
                                   const AttentionLayer& layer,
                                   AttentionStat stat = AttentionStat::kReceived);

}  // namespace mergemix::tome
