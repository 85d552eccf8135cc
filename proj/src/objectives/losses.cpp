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

#include "mergemix/objectives/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mergemix/error.hpp"

namespace mergemix::objectives {
namespace {

void check_rows(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) +
                     " entries, got " + std::to_string(got));
  }
}

nx::Var constant_vector(nx::Tape& tape, std::span<const double> v) {
  return tape.constant(nx::Tensor({v.size()}, std::vector<double>(v.begin(), v.end())));
}

// [B x T] -> [B]: row b = sum_t<len_b coeff_b * x[b, t].
nx::Var masked_row_sums(nx::Var x, std::span<const std::size_t> lengths,
                        std::span<const double> coeff) {
  const nx::Tensor& v = x.value();
  if (v.rank() != 2) throw ShapeError("token log-probs must be [B x T]");
  const std::size_t rows = v.dim(0), cols = v.dim(1);
  check_rows(rows, lengths.size(), "lengths");
  nx::RowMix mix;
  for (std::size_t b = 0; b < rows; ++b) {
    if (lengths[b] == 0 || lengths[b] > cols) {
      throw DomainError("target length " + std::to_string(lengths[b]) + " outside [1, " +
                        std::to_string(cols) + "]");
    }
    for (std::size_t t = 0; t < lengths[b]; ++t) mix.add(b * cols + t, coeff[b]);
    mix.end_row();
  }
  return nx::reshape(nx::combine_rows(nx::reshape(x, {rows * cols, 1}), mix), {rows});
}

}  // namespace

void ObjectiveConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("objective.beta: must be > 0");
}

double neg_log_sigmoid(double z) {
  // softplus(-z)
  return std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

nx::Var mce_loss(nx::Var logits, std::span<const std::size_t> y_i,
                 std::span<const std::size_t> y_j, std::span<const double> lambda_hat) {
  const std::size_t rows = logits.value().rows();
  check_rows(rows, y_i.size(), "mce_loss y_i");
  check_rows(rows, y_j.size(), "mce_loss y_j");
  check_rows(rows, lambda_hat.size(), "mce_loss lambda_hat");
  std::vector<double> wi(rows), wj(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!(lambda_hat[r] >= 0.0 && lambda_hat[r] <= 1.0)) {
      throw DomainError("mce_loss: lambda_hat " + std::to_string(lambda_hat[r]) + " outside [0, 1]");
    }
    wi[r] = lambda_hat[r] / static_cast<double>(rows);
    wj[r] = (1.0 - lambda_hat[r]) / static_cast<double>(rows);
  }
  return nx::add(nx::weighted_sum(nx::nll_rows(logits, y_i), wi),
                 nx::weighted_sum(nx::nll_rows(logits, y_j), wj));
}

nx::Var total_cls_loss(nx::Var mixed_logits, nx::Var raw_logits, std::span<const std::size_t> y_i,
                       std::span<const std::size_t> y_j, std::span<const double> lambda_hat) {
  return nx::add(mce_loss(mixed_logits, y_i, y_j, lambda_hat), nx::cross_entropy(raw_logits, y_i));
}

nx::Var sft_loss(nx::Var token_logprobs, std::span<const std::size_t> lengths) {
  const double w = -1.0 / static_cast<double>(lengths.size());
  const std::vector<double> coeff(lengths.size(), w);
  return nx::sum(masked_row_sums(token_logprobs, lengths, coeff));
}

double avg_logprob_score(double sum_logprob, std::size_t y_len, double beta) {
  if (y_len == 0) throw DomainError("avg_logprob_score: empty response");
  return beta / static_cast<double>(y_len) * sum_logprob;
}

nx::Var avg_logprob_score(nx::Var token_logprobs, std::span<const std::size_t> lengths,
                          double beta) {
  std::vector<double> coeff(lengths.size());
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    coeff[b] = lengths[b] ? beta / static_cast<double>(lengths[b]) : 0.0;
  }
  return masked_row_sums(token_logprobs, lengths, coeff);
}

nx::Var sequence_logprob(nx::Var token_logprobs, std::span<const std::size_t> lengths) {
  const std::vector<double> coeff(lengths.size(), 1.0);
  return masked_row_sums(token_logprobs, lengths, coeff);
}

double mixed_simpo_loss(const PreferenceScores& s) {
  return neg_log_sigmoid(s.s_w - s.s_l - s.margin);
}

nx::Var mixed_simpo_loss(nx::Var s_w, nx::Var s_l, std::span<const double> margin) {
  check_rows(s_w.value().size(), margin.size(), "mixed_simpo_loss margin");
  nx::Var z = nx::sub(nx::sub(s_w, s_l), constant_vector(s_w.tape(), margin));
  return nx::mean(nx::softplus(nx::scale(z, -1.0)));
}

double dpo_loss(double policy_w, double policy_l, double ref_w, double ref_l, double beta) {
  return neg_log_sigmoid(beta * ((policy_w - ref_w) - (policy_l - ref_l)));
}

nx::Var dpo_loss(nx::Var policy_w, nx::Var policy_l, std::span<const double> ref_w,
                 std::span<const double> ref_l, double beta) {
  const std::size_t n = policy_w.value().size();
  check_rows(n, ref_w.size(), "dpo_loss ref_w");
  check_rows(n, ref_l.size(), "dpo_loss ref_l");
  std::vector<double> ref_gap(n);
  for (std::size_t i = 0; i < n; ++i) ref_gap[i] = ref_w[i] - ref_l[i];
  nx::Var z = nx::sub(nx::sub(policy_w, policy_l), constant_vector(policy_w.tape(), ref_gap));
  return nx::mean(nx::softplus(nx::scale(z, -beta)));
}

nx::Var total_mllm_loss(nx::Var sft, nx::Var simpo) { return nx::add(sft, simpo); }

}  // namespace mergemix::objectives
