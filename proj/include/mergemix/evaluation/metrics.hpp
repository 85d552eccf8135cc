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
#include <span>
#include <vector>

#include "mergemix/data/dataset.hpp"
#include "mergemix/models/vit.hpp"
#include "mergemix/tome/token_state.hpp"

namespace mergemix::eval {

/// Row argmax; ties go to the lower class index.
std::size_t argmax_row(const nx::Tensor& logits, std::size_t row);

/// Throws DomainError on an empty split or a length mismatch.
double top1_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels);

/// Per-sample predicted class, max softmax probability and correctness.
struct Predictions {
  std::vector<std::size_t> classes;
  std::vector<double> confidences;
  std::vector<bool> correct;

  double accuracy() const;
};

Predictions predict(const models::TinyViT& model, const models::ModelParams& params,
                    const data::ImageDataset& split, const tome::MergeSchedule& schedule = {},
                    std::size_t batch_size = 100);
double top1_accuracy(const models::TinyViT& model, const models::ModelParams& params,
                     const data::ImageDataset& split, const tome::MergeSchedule& schedule = {});

struct CalibrationBin {
  double lower = 0, upper = 0;
  double confidence = 0;  // mean confidence in the bin, 0 when empty
  double accuracy = 0;
  std::size_t count = 0;
};

struct CalibrationReport {
  std::size_t n_bins = 0;
  std::vector<CalibrationBin> bins;
  double ece = 0;  // percent
};

/// Equal-width bins over [0, 1]; confidence 1.0 falls in the last bin.
/// ECE = sum_b (n_b / N) |acc_b - conf_b| x 100. Throws DomainError on a
/// confidence outside [0, 1], a length mismatch or n_bins = 0.
CalibrationReport ece(std::span<const double> confidences, const std::vector<bool>& correct,
                      std::size_t n_bins = 15);

struct OcclusionCurve {
  std::vector<double> ratios;
  std::vector<double> accuracy;
};

inline std::vector<double> default_occlusion_ratios() {
  return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

/// Zeroes round(ratio * L0) patches per image and measures top-1. Each image
/// gets one random patch order from `seed`, so occluded sets are nested
/// across ratios. Ratios must be strictly increasing within [0, 1).
OcclusionCurve occlusion_eval(const models::TinyViT& model, const models::ModelParams& params,
                              const data::ImageDataset& split, std::span<const double> ratios,
                              std::uint64_t seed, const tome::MergeSchedule& schedule = {});

/// Zeroes the listed patches of image b in a B x H x W x C batch, in place.
void occlude_patches(nx::Tensor& images, std::size_t b, std::span<const std::size_t> patches,
                     std::size_t patch, std::size_t grid_w);

/// Shape of a ViT for cost accounting.
struct ArchSpec {
  std::size_t patches = 196;  // L0 without the class token
  std::size_t patch_dim = 768;
  std::size_t dim = 384;
  std::size_t depth = 12;
  std::size_t mlp_hidden = 1536;
  std::size_t num_classes = 1000;
  bool use_cls = true;

  static ArchSpec deit_small() { return {}; }
  static ArchSpec from(const models::ViTConfig& cfg);
  std::size_t tokens() const { return patches + (use_cls ? 1 : 0); }
  void validate() const;
};

struct CostEstimate {
  double flops = 0;  // 2 x multiply-accumulates
  std::vector<std::size_t> tokens_per_layer;  // entering each block, then the final count
};

/// Per block entering with n tokens and leaving with m = n - r: QKV and
/// output projections 4nD^2, logits and weighted values 2n^2 D, MLP 2mDH.
/// Patch embedding and the classifier head are included; LayerNorm,
/// softmax and matching costs are not.
CostEstimate flops_estimate(const ArchSpec& spec, const tome::MergeSchedule& schedule);

/// Closed form of the same count without merging.
double vit_flops(const ArchSpec& spec);

}  // namespace mergemix::eval
