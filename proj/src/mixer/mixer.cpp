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

#include "mergemix/mixer/mixer.hpp"

#include <algorithm>
#include <string>

#include "mergemix/error.hpp"

namespace mergemix::mixer {

void MixConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("mix.alpha: must be > 0");
  if (!(tau > 0.0)) throw ConfigError("mix.tau: must be > 0");
  if (rescale_batch == 0 || rescale_index >= rescale_batch) {
    throw ConfigError("mix.rescale_index: " + std::to_string(rescale_index) +
                      " outside a batch of " + std::to_string(rescale_batch));
  }
}

double sample_lambda(double alpha, data::Rng& rng) { return rng.beta(alpha, alpha); }

nx::Tensor mix_images(const nx::Tensor& x_i, const nx::Tensor& x_j,
                      const recovery::PixelMask& mask) {
  if (x_i.shape() != x_j.shape() || x_i.rank() != 3) {
    throw ShapeError("mix_images: " + nx::shape_string(x_i.shape()) + " vs " +
                     nx::shape_string(x_j.shape()));
  }
  if (x_i.dim(0) != mask.height || x_i.dim(1) != mask.width) {
    throw ShapeError("mix_images: mask " + std::to_string(mask.height) + "x" +
                     std::to_string(mask.width) + " for image " + nx::shape_string(x_i.shape()));
  }
  const std::size_t channels = x_i.dim(2);
  nx::Tensor out(x_i.shape());
  for (std::size_t px = 0; px < mask.bits.size(); ++px) {
    const nx::Tensor& from = mask.bits[px] ? x_i : x_j;
    for (std::size_t c = 0; c < channels; ++c) out[px * channels + c] = from[px * channels + c];
  }
  return out;
}

std::vector<double> normalize_draws(std::span<const double> draws, double tau) {
  std::vector<double> out(draws.size());
  if (draws.empty()) return out;
  const auto [lo, hi] = std::minmax_element(draws.begin(), draws.end());
  const double span = *hi - *lo + tau;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    out[i] = std::clamp((draws[i] - *lo) / span, 0.0, 1.0);
  }
  return out;
}

LambdaHat rescale_lambda(std::size_t k, std::size_t l0, std::size_t p, double soft_mask_sum,
                         const MixConfig& cfg, data::Rng& rng) {
  if (l0 == 0 || k > l0) {
    throw DomainError("rescale_lambda: K=" + std::to_string(k) + " with L0=" + std::to_string(l0));
  }
  if (p > 0 && !(soft_mask_sum > 0.0)) {
    throw DomainError("rescale_lambda: soft mask sum must be > 0");
  }
  LambdaHat out;
  out.mu = static_cast<double>(k) / static_cast<double>(l0);
  out.sigma = p == 0 ? 1.0 : static_cast<double>(p) / soft_mask_sum;
  std::vector<double> draws(cfg.rescale_batch);
  for (double& d : draws) d = rng.normal(out.mu, out.sigma);
  out.degenerate = std::all_of(draws.begin(), draws.end(), [&](double d) { return d == draws[0]; });
  out.value = normalize_draws(draws, cfg.tau).at(cfg.rescale_index);
  return out;
}

MixPlan plan_from_saliency(const nx::Tensor& x_i, const nx::Tensor& x_j, const Saliency& sal,
                           double lambda, std::size_t grid_h, std::size_t grid_w,
                           const MixConfig& cfg, data::Rng& rng) {
  MixPlan plan;
  plan.lambda_raw = lambda;
  plan.source = sal.source;
  plan.merged_count = sal.source.group_count();
  const recovery::RecoveredAttention attn = recovery::recover_attention(sal.a_k, sal.source, cfg.recovery);
  plan.mask = recovery::build_mask(attn, lambda);
  const recovery::PixelMask pixels =
      recovery::mask_to_pixels(plan.mask, grid_h, grid_w, x_i.dim(0), x_i.dim(1));
  plan.mixed_image = mix_images(x_i, x_j, pixels);

  const std::size_t l0 = attn.size();
  if (cfg.label_ratio == LabelRatio::kArea) {
    plan.lambda_hat = static_cast<double>(plan.mask.p) / static_cast<double>(l0);
  } else {
    const LambdaHat hat =
        rescale_lambda(plan.merged_count, l0, plan.mask.p, plan.mask.soft_sum(), cfg, rng);
    plan.lambda_hat = hat.value;
    plan.mu = hat.mu;
    plan.sigma = hat.sigma;
    plan.degenerate = hat.degenerate;
  }
  return plan;
}

MixPlan mix_policy(const nx::Tensor& x_i, const nx::Tensor& x_j, double lambda,
                   const SaliencyEncoder& encoder, const MixConfig& cfg, data::Rng& rng) {
  cfg.validate();
  if (x_i.shape() != x_j.shape()) {
    throw ShapeError("mix_policy: " + nx::shape_string(x_i.shape()) + " vs " +
                     nx::shape_string(x_j.shape()));
  }
  const Saliency sal = encoder.saliency(x_i, cfg.merge_schedule);
  return plan_from_saliency(x_i, x_j, sal, lambda, encoder.grid_h(), encoder.grid_w(), cfg, rng);
}

}  // namespace mergemix::mixer
