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

#include "mergemix/training/run.hpp"

#include <fstream>

#include "mergemix/data/dataset.hpp"
#include "mergemix/error.hpp"
#include "mergemix/io/binary.hpp"

namespace mergemix::training {
namespace {

constexpr const char* kRunFormat = "mergemix-run/1";

nlohmann::ordered_json manifest(const RunConfig& cfg, const RunOptions& opts, std::size_t done,
                                const char* status) {
  nlohmann::ordered_json m;
  m["format"] = kRunFormat;
  m["mode"] = to_string(cfg.train.mode);
  m["variant"] = to_string(cfg.train.variant);
  m["config_hash"] = config_hash(to_json(cfg));
  m["seed"] = cfg.train.seed;
  m["seed_source"] = opts.seed_source;
  m["train"] = cfg.data.train;
  m["test"] = cfg.data.test;
  m["epochs"] = cfg.train.epochs;
  m["epochs_completed"] = done;
  m["final_checkpoint"] =
      cfg.train.epochs ? "checkpoints/epoch_" + std::to_string(cfg.train.epochs) + ".mmxc" : std::string();
  m["status"] = status;
  return m;
}

// Keeps the lines a resumed state has already accounted for.
std::string resumable_prefix(const std::filesystem::path& metrics, const RunState& st) {
  std::ifstream in(metrics);
  if (!in) throw IoError(metrics.string() + ": cannot read");
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IoError(metrics.string() + ": malformed line");
    const bool step = j.value("kind", "") == "step";
    const std::size_t k = step ? j.at("step").get<std::size_t>() : j.at("epoch").get<std::size_t>();
    if (k < (step ? st.step : st.epoch)) out += line + "\n";
  }
  return out;
}

class MetricsSink {
 public:
  MetricsSink(const std::filesystem::path& path, const std::string& prefix) : path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError(path.string() + ": cannot write");
    out_ << prefix;
  }
  void line(const nlohmann::ordered_json& j) {
    out_ << j.dump() << '\n';
    if (!out_) throw IoError(path_.string() + ": write failed");
  }
  void flush() { out_.flush(); }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace

TrainResult execute_run(const RunConfig& cfg, const std::filesystem::path& out, const RunOptions& opts) {
  cfg.validate();
  if (cfg.data.train.empty()) throw ConfigError("data.train: required");
  const RunLayout run{out};
  std::filesystem::create_directories(out / "checkpoints");

  std::optional<RunState> resume;
  std::string prefix;
  if (opts.resume) {
    resume = load_run_state(run.state());
    prefix = resumable_prefix(run.metrics(), *resume);
  }
  io::write_text(run.config().string(), to_json(cfg).dump(2) + "\n");
  io::write_text(run.manifest().string(),
                 manifest(cfg, opts, resume ? resume->epoch : 0, "running").dump(2) + "\n");

  MetricsSink sink(run.metrics(), prefix);
  Hooks hooks;
  hooks.on_step = [&sink](const nlohmann::ordered_json& j) { sink.line(j); };
  hooks.on_epoch = [&](const nlohmann::ordered_json& j, const RunState& st) {
    sink.line(j);
    sink.flush();
    models::save_checkpoint(st.params, run.checkpoint(st.epoch));
    save_run_state(st, run.state());
    io::write_text(run.manifest().string(), manifest(cfg, opts, st.epoch, "running").dump(2) + "\n");
  };

  TrainResult result;
  if (cfg.train.mode == Mode::kClassification) {
    const data::ImageDataset train = data::load_dataset(cfg.data.train);
    std::optional<data::ImageDataset> test;
    if (!cfg.data.test.empty()) test = data::load_dataset(cfg.data.test);
    result = train_classifier(cfg.train, cfg.model, train, test ? &*test : nullptr, hooks, std::move(resume));
  } else {
    const data::CaptionDataset train = data::load_captions(cfg.data.train);
    std::optional<data::CaptionDataset> test;
    if (!cfg.data.test.empty()) test = data::load_captions(cfg.data.test);
    models::CaptionerConfig cap = cfg.captioner;
    cap.vision = cfg.model;
    result = train_preference(cfg.train, cap, train, test ? &*test : nullptr, hooks, std::move(resume));
  }
  sink.flush();
  if (cfg.train.epochs == 0) save_run_state(result.state, run.state());
  io::write_text(run.manifest().string(),
                 manifest(cfg, opts, result.state.epoch, "complete").dump(2) + "\n");
  return result;
}

RunConfig load_run_config(const RunLayout& run) {
  const std::string text = io::read_text(run.config().string());
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw IoError(run.config().string() + ": malformed JSON");
  return run_config_from_json(j);
}

nlohmann::json load_complete_manifest(const RunLayout& run) {
  if (!std::filesystem::exists(run.manifest())) throw IoError(run.root.string() + ": incomplete run");
  const nlohmann::json m = nlohmann::json::parse(io::read_text(run.manifest().string()), nullptr, false);
  if (m.is_discarded() || m.value("format", "") != kRunFormat) {
    throw IoError(run.manifest().string() + ": not a run manifest");
  }
  if (m.value("status", "") != "complete") throw IoError(run.root.string() + ": incomplete run");
  return m;
}

}  // namespace mergemix::training
