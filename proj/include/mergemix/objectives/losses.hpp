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

#include "mergemix/numerics/ops.hpp"

namespace mergemix::objectives {

struct ObjectiveConfig {
  double beta = 2.0;
  bool use_reference_model = false;  // DPO instead of mixed SimPO
  bool ranking = true;               // false: SFT term only

  void validate() const;
};

struct PreferenceScores {
  double s_w = 0.0;
  double s_l = 0.0;
  double margin = 0.0;  // 1 - lambda_hat
};

/// -log(sigmoid(z)), stable for large |z|.
double neg_log_sigmoid(double z);

/// Mean over rows of lambda_hat[r] * CE(row, y_i[r]) + (1 - lambda_hat[r]) * CE(row, y_j[r]).
nx::Var mce_loss(nx::Var logits, std::span<const std::size_t> y_i,
                 std::span<const std::size_t> y_j, std::span<const double> lambda_hat);

/// mce on the mixed batch plus one-hot CE on the raw batch (labels y_i).
nx::Var total_cls_loss(nx::Var mixed_logits, nx::Var raw_logits, std::span<const std::size_t> y_i,
                       std::span<const std::size_t> y_j, std::span<const double> lambda_hat);

/// token_logprobs is [B x T]; positions >= lengths[b] are padding. Returns
/// the batch mean of -sum_t log pi.
nx::Var sft_loss(nx::Var token_logprobs, std::span<const std::size_t> lengths);

/// beta / |y| * sum log pi.
double avg_logprob_score(double sum_logprob, std::size_t y_len, double beta);
/// Per-row scores [B] from [B x T] token log-probs.
nx::Var avg_logprob_score(nx::Var token_logprobs, std::span<const std::size_t> lengths,
                          double beta);

/// Per-row sum of log pi over the first lengths[b] positions.
nx::Var sequence_logprob(nx::Var token_logprobs, std::span<const std::size_t> lengths);

/// -log sigmoid(s_w - s_l - margin).
double mixed_simpo_loss(const PreferenceScores& s);
/// Batch mean of the above over [B] score vectors.
nx::Var mixed_simpo_loss(nx::Var s_w, nx::Var s_l, std::span<const double> margin);

/// -log sigmoid(beta * ((pw - rw) - (pl - rl))).
double dpo_loss(double policy_w, double policy_l, double ref_w, double ref_l, double beta);
/// Batch mean over [B] sequence log-probs; the reference inputs are constants.
nx::Var dpo_loss(nx::Var policy_w, nx::Var policy_l, std::span<const double> ref_w,
                 std::span<const double> ref_l, double beta);

inline double total_mllm_loss(double sft, double simpo) { return sft + simpo; }
nx::Var total_mllm_loss(nx::Var sft, nx::Var simpo);

}  // namespace mergemix::objectives
