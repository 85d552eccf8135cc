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
#include <span>
#include <vector>

#include "mergemix/numerics/tape.hpp"

// Differentiable primitives. Each op records one node on the tape of its
// inputs; a Var's rank is taken literally (no implicit broadcasting beyond
// what each op documents).

namespace mergemix::nx {

/// Sparse linear map from input rows to output rows:
/// out[r] = sum_e weight[e] * in[src[e]] for e in [offsets[r], offsets[r+1]).
/// Covers gathers (embedding lookup), size-weighted merges and pooling.
struct RowMix {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> src;
  std::vector<double> weight;

  std::size_t out_rows() const { return offsets.size() - 1; }
  void add(std::size_t from, double w) {
    src.push_back(from);
    weight.push_back(w);
  }
  void end_row() { offsets.push_back(src.size()); }
};

// a[m x k] * b[k x n]
Var matmul(Var a, Var b);
// x[... x in] * w[in x out] + bias[out]
Var linear(Var x, Var w, Var bias);
// Batched: a[B x m x k] * b[B x k x n], or b[B x n x k] transposed.
Var bmm(Var a, Var b, bool transpose_b = false);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double c);
// x[... x n] + bias[n]
Var add_bias(Var x, Var bias);
Var reshape(Var x, Shape shape);

// Normalizes the last dimension; gain/bias have that length.
Var layernorm(Var x, Var gain, Var bias, double eps = 1e-5);
// Exact (erf) GELU.
Var gelu(Var x);
Var softplus(Var x);

/// Row-wise softmax over the last dimension, max-subtracted.
Var softmax_rows(Var x);
Var log_softmax_rows(Var x);

// [(B*L) x (H*dh)] <-> [(B*H) x L x dh]
Var split_heads(Var x, std::size_t batch, std::size_t len, std::size_t heads);
Var merge_heads(Var x, std::size_t batch, std::size_t len, std::size_t heads);

/// x viewed as [rows x cols]; returns [mix.out_rows() x cols].
Var combine_rows(Var x, const RowMix& mix);
/// Stacks [r_i x cols] blocks vertically.
Var concat_rows(const std::vector<Var>& parts);

/// x[r, ids[r]] for each row; result has one entry per row.
Var pick(Var x, std::span<const std::size_t> ids);
/// -log softmax(logits)[label] per row.
Var nll_rows(Var logits, std::span<const std::size_t> labels);
/// Mean over rows of nll_rows.
Var cross_entropy(Var logits, std::span<const std::size_t> labels);

Var sum(Var x);
Var mean(Var x);
/// sum_i w_i x_i with constant weights.
Var weighted_sum(Var x, std::span<const double> weights);

/// Value-only helper used outside the tape (tests, evaluation).
Tensor softmax_rows(const Tensor& x);

}  // namespace mergemix::nx
