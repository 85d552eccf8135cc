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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"
#include "mergemix/data/dataset.hpp"
#include "mergemix/models/captioner.hpp"
#include "mergemix/models/vit.hpp"
#include "mergemix/training/config.hpp"
#include "mergemix/training/optimizer.hpp"

namespace mergemix::training {

/// Everything needed to continue a run bit-exactly.
struct RunState {
  std::size_t epoch = 0;  // completed epochs
  std::size_t step = 0;   // completed optimizer steps
  models::ModelParams params;
  models::ModelParams reference;  // frozen DPO reference; empty otherwise
  AdamState opt;
  std::array<std::uint64_t, 4> data_rng{}, mix_rng{};
  std::vector<double> loss_history;  // one total loss per step

  friend bool operator==(const RunState&, const RunState&) = default;
};

/// MMXS: magic, u32 version, counters, PRNG states, loss history, then the
/// params, reference, m and v blobs in MMXC encoding.
std::vector<std::uint8_t> encode_run_state(const RunState& s);
RunState decode_run_state(const std::vector<std::uint8_t>& bytes, const std::string& what);
void save_run_state(const RunState& s, const std::filesystem::path& path);
RunState load_run_state(const std::filesystem::path& path);

/// Fresh state: params from the init stream, moments zeroed, data and mix
/// streams derived from cfg.seed.
RunState initial_state(const TrainConfig& cfg, models::ModelParams params);
std::uint64_t init_seed(const TrainConfig& cfg);

/// One JSON object per step and per epoch; "kind" is "step" or "epoch".
struct MetricsRecord {
  std::vector<nlohmann::ordered_json> steps, epochs;
};

struct Hooks {
  std::function<void(const nlohmann::ordered_json&)> on_step;
  std::function<void(const nlohmann::ordered_json&, const RunState&)> on_epoch;
};

struct TrainResult {
  RunState state;
  MetricsRecord metrics;
};

/// Uniform random permutation without fixed points (n >= 2), by rejection.
std::vector<std::size_t> random_derangement(std::size_t n, data::Rng& rng);

/// Batches of one epoch: a shuffle, cut into batch_size pieces; a trailing
/// piece of one sample is dropped because it cannot be paired.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, data::Rng& rng);
std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size);

/// Classification. Vanilla trains on one-hot CE only. The mixing variants
/// pair each batch by derangement, draw one lambda per batch, mix every pair
/// and minimize total_cls_loss, with an extra forward on the raw batch.
/// `test` (optional) adds held-out accuracy and ECE to the epoch records.
/// Non-finite values abort with NumericError naming epoch, step and op.
TrainResult train_classifier(const TrainConfig& cfg, const models::ViTConfig& model_cfg,
                             const data::ImageDataset& train, const data::ImageDataset* test = nullptr,
                             const Hooks& hooks = {}, std::optional<RunState> resume = std::nullopt);

/// Preference alignment. Winner: the raw image; loser: the image mixed with
/// a random auxiliary image from the set. Loss = SFT on the winner plus
/// mixed SimPO with margin 1 - lambda_hat (or DPO against the initial params).
TrainResult train_preference(const TrainConfig& cfg, const models::CaptionerConfig& model_cfg,
                             const data::CaptionDataset& train, const data::CaptionDataset* heldout = nullptr,
                             const Hooks& hooks = {}, std::optional<RunState> resume = std::nullopt);

struct PreferenceGap {
  std::vector<double> gaps;  // s_w - s_l per triple
  double mean = 0;
};

/// Held-out score gap with losers built from `seed`.
PreferenceGap evaluate_preference(const models::ToyCaptioner& model, const models::ModelParams& params,
                                  const data::CaptionDataset& split, const mixer::MixConfig& mix, double beta,
                                  std::uint64_t seed, const tome::MergeSchedule& forward = {});

}  // namespace mergemix::training
