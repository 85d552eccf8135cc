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

#include "mergemix/data/rng.hpp"
#include "mergemix/numerics/tensor.hpp"
#include "mergemix/recovery/recovery.hpp"
#include "mergemix/tome/source.hpp"
#include "mergemix/tome/token_state.hpp"

namespace mergemix::mixer {

/// How the label weight is derived from the mask.
enum class LabelRatio {
  kRescaled,  // Gaussian re-scaled lambda_hat
  kArea,      // p / L0, the plain TopK baseline
};

struct MixConfig {
  double alpha = 1.0;
  double tau = 1e-5;
  tome::MergeSchedule merge_schedule;
  std::size_t rescale_batch = 64;
  std::size_t rescale_index = 0;
  LabelRatio label_ratio = LabelRatio::kRescaled;
  recovery::RecoveryMode recovery = recovery::RecoveryMode::kBroadcast;

  /// Throws ConfigError on alpha <= 0, tau <= 0 or an index outside the batch.
  void validate() const;
};

/// Beta(alpha, alpha).
double sample_lambda(double alpha, data::Rng& rng);

/// x_hat = M * x_i + (1 - M) * x_j over H x W x C images; the pixel mask is
/// shared by all channels.
nx::Tensor mix_images(const nx::Tensor& x_i, const nx::Tensor& x_j,
                      const recovery::PixelMask& mask);

/// (s - min) / (max - min + tau) clipped to [0, 1].
std::vector<double> normalize_draws(std::span<const double> draws, double tau);

struct LambdaHat {
  double value = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  bool degenerate = false;  // every draw equal: the formula returns 0
};

/// mu = K / L0, sigma = p / soft_mask_sum (1 when p = 0). Draws
/// cfg.rescale_batch samples of N(mu, sigma), normalizes the batch and
/// returns element cfg.rescale_index.
LambdaHat rescale_lambda(std::size_t k, std::size_t l0, std::size_t p, double soft_mask_sum,
                         const MixConfig& cfg, data::Rng& rng);

/// Merged saliency A_K and lineage for one image.
struct Saliency {
  nx::Tensor a_k;
  tome::SourceMatrix source;
};

class SaliencyEncoder {
 public:
  virtual ~SaliencyEncoder() = default;
  virtual Saliency saliency(const nx::Tensor& image, const tome::MergeSchedule& schedule) const = 0;
  virtual std::size_t grid_h() const = 0;
  virtual std::size_t grid_w() const = 0;
};

struct MixPlan {
  recovery::PatchMask mask;
  double lambda_raw = 0.0;
  double lambda_hat = 0.0;
  double mu = 1.0;
  double sigma = 1.0;
  bool degenerate = false;
  std::size_t merged_count = 0;  // K
  tome::SourceMatrix source;
  nx::Tensor mixed_image;
};

/// Everything after the encoder: recovery, mask, blend, lambda_hat.
MixPlan plan_from_saliency(const nx::Tensor& x_i, const nx::Tensor& x_j, const Saliency& sal,
                           double lambda, std::size_t grid_h, std::size_t grid_w,
                           const MixConfig& cfg, data::Rng& rng);

/// Saliency of x_i under cfg.merge_schedule, then plan_from_saliency.
MixPlan mix_policy(const nx::Tensor& x_i, const nx::Tensor& x_j, double lambda,
                   const SaliencyEncoder& encoder, const MixConfig& cfg, data::Rng& rng);

}  // namespace mergemix::mixer
