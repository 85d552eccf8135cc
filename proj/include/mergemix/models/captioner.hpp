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

#include "mergemix/models/vit.hpp"

namespace mergemix::models {

struct CaptionerConfig {
  ViTConfig vision;  // num_classes unused
  std::size_t vocab = 32;
  std::size_t text_depth = 2;
  std::size_t text_heads = 2;
  std::size_t max_len = 8;      // prompt + BOS + target - 1
  bool ablate_cross = false;    // drop cross-attention: text ignores the image
  std::size_t pad_id = 0;
  std::size_t bos_id = 1;

  void validate() const;
};

/// Vision trunk plus a small causal decoder with cross-attention to the
/// merged vision tokens.
class ToyCaptioner {
 public:
  explicit ToyCaptioner(CaptionerConfig cfg);

  const CaptionerConfig& config() const { return cfg_; }
  ModelParams init(std::uint64_t seed) const;

  struct Output {
    nx::Var token_logprobs;  // [B x T], log pi(target_t | image, prompt, target_<t)
    std::vector<std::size_t> lengths;
    TrunkOutput vision;
  };

  /// Teacher-forced scoring of `targets` (one id list per image, each
  /// non-empty) after the shared `prompt`. Throws DomainError on ids outside
  /// the vocabulary.
  Output forward(const Bound& p, const nx::Tensor& images, std::span<const std::size_t> prompt,
                 const std::vector<std::vector<std::size_t>>& targets,
                 const tome::MergeSchedule& schedule) const;

  /// Value-only [B x T] log-probs.
  nx::Tensor score(const ModelParams& params, const nx::Tensor& images,
                   std::span<const std::size_t> prompt,
                   const std::vector<std::vector<std::size_t>>& targets,
                   const tome::MergeSchedule& schedule) const;

  static constexpr const char* kVisionPrefix = "vision.";

 private:
  CaptionerConfig cfg_;
};

}  // namespace mergemix::models
