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
#include <cstdint>
#include <string>
#include <vector>

#include "mergemix/mixer/mixer.hpp"
#include "mergemix/models/params.hpp"
#include "mergemix/numerics/ops.hpp"
#include "mergemix/tome/attention.hpp"
#include "mergemix/tome/token_state.hpp"

namespace mergemix::models {

struct ViTConfig {
  std::size_t image_h = 32;
  std::size_t image_w = 32;
  std::size_t channels = 3;
  std::size_t patch = 4;
  std::size_t dim = 64;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 256;
  std::size_t num_classes = 10;
  bool use_cls = false;
  // Per-channel input normalization applied inside the model.
  std::vector<double> norm_mean{0.5, 0.5, 0.5};
  std::vector<double> norm_std{0.25, 0.25, 0.25};

  std::size_t grid_h() const { return image_h / patch; }
  std::size_t grid_w() const { return image_w / patch; }
  std::size_t patches() const { return grid_h() * grid_w(); }
  std::size_t patch_dim() const { return patch * patch * channels; }
  std::size_t prefix() const { return use_cls ? 1 : 0; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// [B x H x W x C] in [0, 1] -> normalized patch rows [B*L0 x P*P*C]; patches
/// are row-major over the grid, pixels row-major inside a patch.
nx::Tensor patchify(const nx::Tensor& images, const ViTConfig& cfg);

/// Encoder state after all blocks.
struct TrunkOutput {
  nx::Var tokens;  // [B*K x D] after the final LayerNorm; class token first per sample
  std::size_t batch = 0;
  std::size_t count = 0;  // K, including the class token
  std::vector<std::vector<double>> sizes;     // per sample, K entries
  std::vector<tome::SourceMatrix> source;     // per sample, patches -> patch groups
  std::vector<nx::Tensor> a_k;                // per sample, one score per patch group
  std::vector<std::size_t> token_counts;      // per layer boundary, incl. class token
};

void add_trunk_params(ModelParams& params, const ViTConfig& cfg, const std::string& prefix,
                      data::Rng& rng);

/// `schedule` must be empty (no merging) or have one entry per block. A_K
/// comes from the last block's pre-merge attention, carried onto that
/// block's merged groups.
TrunkOutput run_trunk(const Bound& p, const ViTConfig& cfg, const std::string& prefix,
                      const nx::Tensor& images, const tome::MergeSchedule& schedule,
                      tome::AttentionStat stat = tome::AttentionStat::kReceived);

/// Pre-norm ViT classifier with optional ToMe merging in every block.
class TinyViT {
 public:
  explicit TinyViT(ViTConfig cfg);

  const ViTConfig& config() const { return cfg_; }
  ModelParams init(std::uint64_t seed) const;

  struct Output {
    nx::Var logits;  // [B x num_classes]
    TrunkOutput trunk;
  };
  Output forward(const Bound& p, const nx::Tensor& images, const tome::MergeSchedule& schedule,
                 tome::AttentionStat stat = tome::AttentionStat::kReceived) const;

  /// Value-only logits, no gradients kept.
  nx::Tensor predict(const ModelParams& params, const nx::Tensor& images,
                     const tome::MergeSchedule& schedule) const;

 private:
  ViTConfig cfg_;
};

/// Adapts a trunk to the mixer's encoder interface (first sample only).
class TrunkSaliency : public mixer::SaliencyEncoder {
 public:
  TrunkSaliency(const ViTConfig& cfg, const ModelParams& params, std::string prefix,
                tome::AttentionStat stat = tome::AttentionStat::kReceived)
      : cfg_(cfg), params_(params), prefix_(std::move(prefix)), stat_(stat) {}

  mixer::Saliency saliency(const nx::Tensor& image, const tome::MergeSchedule& schedule) const override;
  std::size_t grid_h() const override { return cfg_.grid_h(); }
  std::size_t grid_w() const override { return cfg_.grid_w(); }

 private:
  const ViTConfig& cfg_;
  const ModelParams& params_;
  std::string prefix_;
  tome::AttentionStat stat_;
};

/// Stacks H x W x C images into one [B x H x W x C] batch.
nx::Tensor stack_images(const std::vector<const nx::Tensor*>& images);
/// Image b of a batch.
nx::Tensor batch_item(const nx::Tensor& batch, std::size_t b);

}  // namespace mergemix::models
