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

#include "json.hpp"
#include "mergemix/mixer/mixer.hpp"
#include "mergemix/models/captioner.hpp"
#include "mergemix/models/vit.hpp"
#include "mergemix/objectives/losses.hpp"
#include "mergemix/training/optimizer.hpp"

namespace mergemix::training {

enum class Mode { kClassification, kPreference };

/// Classification recipes. TopK mixes on raw (unmerged) attention and
/// weights labels by area; MergeMix uses the configured merge schedule and
/// the re-scaled lambda_hat.
enum class Variant { kVanilla, kTopK, kMergeMix };

struct TrainConfig {
  Mode mode = Mode::kClassification;
  Variant variant = Variant::kMergeMix;
  std::size_t epochs = 30;
  std::size_t batch_size = 100;
  double lr = 0.0;  // required
  double weight_decay = 0.05;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double warmup_fraction = 0.03;
  std::string schedule = "cosine";
  std::uint64_t seed = 0;
  /// Merging inside the trained model's own forward pass (empty: none).
  tome::MergeSchedule forward_schedule;
  mixer::MixConfig mix;
  objectives::ObjectiveConfig objective;

  /// Throws ConfigError naming the field. `depth` is the encoder depth.
  void validate(std::size_t depth) const;
  AdamWConfig adamw() const { return {beta1, beta2, eps, weight_decay}; }
  /// The mix settings after variant overrides.
  mixer::MixConfig effective_mix(std::size_t depth) const;
};

struct DataPaths {
  std::string train, test;
};

struct EvalConfig {
  std::size_t n_bins = 15;
  std::vector<double> occlusion_ratios{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::uint64_t occlusion_seed = 0;
};

/// Everything a run needs, as stored in config.json.
struct RunConfig {
  TrainConfig train;
  models::ViTConfig model;
  models::CaptionerConfig captioner;  // vision is taken from `model`
  DataPaths data;
  EvalConfig eval;

  void validate() const;
};

const char* to_string(Mode m);
const char* to_string(Variant v);

/// Strict: unknown keys and wrong types raise ConfigError("<path>: ...").
/// A missing "lr" raises "lr: required".
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const RunConfig& cfg);

/// Applies "a.b.c=value". The value is parsed as JSON when possible and
/// otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// FNV-1a 64 over the canonical dump, as 16 hex digits.
std::string config_hash(const nlohmann::ordered_json& j);

}  // namespace mergemix::training
