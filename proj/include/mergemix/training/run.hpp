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
#include <filesystem>
#include <string>

#include "json.hpp"
#include "mergemix/training/config.hpp"
#include "mergemix/training/trainer.hpp"

namespace mergemix::training {

/// Files of a run directory.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path manifest() const { return root / "run.json"; }
  std::filesystem::path metrics() const { return root / "metrics.jsonl"; }
  std::filesystem::path state() const { return root / "state.mmxs"; }
  std::filesystem::path report() const { return root / "report.json"; }
  /// `epoch` counts completed epochs, starting at 1.
  std::filesystem::path checkpoint(std::size_t epoch) const {
    return root / "checkpoints" / ("epoch_" + std::to_string(epoch) + ".mmxc");
  }
};

struct RunOptions {
  std::string seed_source = "config";  // or the env var that overrode it
  bool resume = false;                 // continue from state.mmxs
};

/// Trains cfg.train.mode into `out`. Writes config.json and run.json up
/// front, appends one metrics.jsonl line per step and epoch, and after
/// each epoch saves checkpoints/epoch_k.mmxc and state.mmxs. run.json ends
/// with "status": "complete". Nothing written depends on wall time.
TrainResult execute_run(const RunConfig& cfg, const std::filesystem::path& out, const RunOptions& opts = {});

/// The resolved config of a run directory.
RunConfig load_run_config(const RunLayout& run);

/// run.json; throws IoError("<dir>: incomplete run") unless complete.
nlohmann::json load_complete_manifest(const RunLayout& run);

}  // namespace mergemix::training
