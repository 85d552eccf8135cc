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

#include "mergemix/tome/attention.hpp"

#include <cmath>
#include <string>

#include "mergemix/error.hpp"

namespace mergemix::tome {

AttentionResult multi_head_attention(nx::Var x, nx::Var memory, const AttentionWeights& w,
                                     std::size_t batch, std::size_t q_len, std::size_t kv_len,
                                     const nx::Tensor* logit_bias) {
  const std::size_t dim = w.wq.value().dim(1);
  if (dim % w.heads != 0) throw ShapeError("attention: width not divisible by heads");
  const std::size_t dh = dim / w.heads;

  nx::Var q = nx::linear(x, w.wq, w.bq);
  // A key bias only shifts each query's logits by a constant, so it may be absent.
  nx::Var k = w.bk.valid() ? nx::linear(memory, w.wk, w.bk) : nx::matmul(memory, w.wk);
  nx::Var v = nx::linear(memory, w.wv, w.bv);
  nx::Var qh = nx::split_heads(q, batch, q_len, w.heads);
  nx::Var kh = nx::split_heads(k, batch, kv_len, w.heads);
  nx::Var vh = nx::split_heads(v, batch, kv_len, w.heads);

  nx::Var logits = nx::scale(nx::bmm(qh, kh, true), 1.0 / std::sqrt(static_cast<double>(dh)));
  if (logit_bias != nullptr) {
    if (logit_bias->shape() != logits.value().shape()) {
      throw ShapeError("attention: bias " + nx::shape_string(logit_bias->shape()) +
                       " vs logits " + nx::shape_string(logits.value().shape()));
    }
    logits = nx::add(logits, x.tape().constant(*logit_bias));
  }
  nx::Var probs = nx::softmax_rows(logits);
  nx::Var ctx = nx::merge_heads(nx::bmm(probs, vh), batch, q_len, w.heads);
  return {nx::linear(ctx, w.wo, w.bo), k, probs};
}

nx::Tensor attention_bias(const std::vector<std::vector<double>>& key_sizes, std::size_t heads,
                          std::size_t q_len, bool causal) {
  const std::size_t batch = key_sizes.size();
  const std::size_t kv_len = batch ? key_sizes.front().size() : 0;
  nx::Tensor bias({batch * heads, q_len, kv_len});
  constexpr double kMasked = -1e30;
  for (std::size_t b = 0; b < batch; ++b) {
    if (key_sizes[b].size() != kv_len) throw ShapeError("attention_bias: ragged key sizes");
    for (std::size_t h = 0; h < heads; ++h) {
      double* base = bias.data().data() + (b * heads + h) * q_len * kv_len;
      for (std::size_t i = 0; i < q_len; ++i) {
        for (std::size_t j = 0; j < kv_len; ++j) {
          base[i * kv_len + j] = (causal && j > i) ? kMasked : std::log(key_sizes[b][j]);
        }
      }
    }
  }
  return bias;
}

std::vector<double> attention_summary(const nx::Tensor& probs, std::size_t batch,
                                      std::size_t heads, std::size_t b, AttentionStat stat) {
  if (probs.rank() != 3 || probs.dim(0) != batch * heads || b >= batch) {
    throw ShapeError("attention_summary: unexpected probs " + nx::shape_string(probs.shape()));
  }
  const std::size_t q_len = probs.dim(1), kv_len = probs.dim(2);
  std::vector<double> out(kv_len, 0.0);
  const std::size_t queries = stat == AttentionStat::kClsRow ? 1 : q_len;
  for (std::size_t h = 0; h < heads; ++h) {
    const double* base = probs.data().data() + (b * heads + h) * q_len * kv_len;
    for (std::size_t i = 0; i < queries; ++i) {
      for (std::size_t j = 0; j < kv_len; ++j) out[j] += base[i * kv_len + j];
    }
  }
  const double norm = 1.0 / static_cast<double>(heads * queries);
  for (double& v : out) v *= norm;
  return out;
}

AttentionLayer AttentionLayer::zeros(std::size_t dim, std::size_t heads) {
  AttentionLayer l;
  l.wq = l.wk = l.wv = l.wo = nx::Tensor({dim, dim});
  l.bq = l.bk = l.bv = l.bo = nx::Tensor({dim});
  l.heads = heads;
  return l;
}

ToMeAttentionResult tome_attention(const TokenState& state, std::size_t r,
                                   const AttentionLayer& layer, AttentionStat stat) {
  state.validate();
  const std::size_t len = state.count();
  nx::Tape tape;
  nx::Var x = tape.constant(state.tokens);
  AttentionWeights w{tape.constant(layer.wq), tape.constant(layer.bq), tape.constant(layer.wk),
                     tape.constant(layer.bk), tape.constant(layer.wv), tape.constant(layer.bv),
                     tape.constant(layer.wo), tape.constant(layer.bo), layer.heads};
  const nx::Tensor bias = attention_bias({state.sizes}, layer.heads, len, false);
  AttentionResult attn = multi_head_attention(x, x, w, 1, len, len, &bias);

  TokenState updated = state;
  updated.tokens = nx::add(x, attn.out).value();

  ToMeAttentionResult result;
  result.plan = bipartite_soft_matching(attn.keys.value(), r);
  const std::vector<double> received =
      attention_summary(attn.probs.value(), 1, layer.heads, 0, stat);
  result.a_k = nx::Tensor::vector(merge_scores(result.plan, state.sizes, received));
  result.z_k = apply_merge(updated, result.plan);
  result.source = result.z_k.source;
  return result;
}

}  // namespace mergemix::tome
