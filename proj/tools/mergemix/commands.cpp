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

#include "commands.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "mergemix/data/rng.hpp"
#include "mergemix/error.hpp"
#include "mergemix/evaluation/metrics.hpp"
#include "mergemix/io/binary.hpp"
#include "mergemix/io/image.hpp"
#include "mergemix/io/svg.hpp"
#include "mergemix/mixer/mixer.hpp"
#include "mergemix/models/captioner.hpp"
#include "mergemix/models/vit.hpp"
#include "mergemix/recovery/recovery.hpp"
#include "mergemix/training/run.hpp"

namespace mergemix::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using training::RunConfig;
using training::RunLayout;

nlohmann::json read_json(const std::string& path) {
  const std::string text = io::read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": malformed JSON: " + e.what());
  }
}

void emit(const ordered_json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (!out.empty()) io::write_text(out, text);
  std::cout << text;
}

std::uint64_t parse_seed(const char* text, const char* what) {
  const std::string s(text);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(std::string(what) + ": not an unsigned integer: " + s);
  return v;
}

// Classification runs only; preference checkpoints hold a captioner.
struct LoadedRun {
  RunConfig cfg;
  models::ModelParams params;
};

LoadedRun load_classifier(const std::string& dir, const std::string& checkpoint) {
  const RunLayout run{dir};
  LoadedRun out{training::load_run_config(run), {}};
  if (out.cfg.train.mode != training::Mode::kClassification) {
    throw ConfigError("mode: " + dir + " is a preference run; this command needs a classifier");
  }
  if (!checkpoint.empty()) {
    out.params = models::load_checkpoint(checkpoint);
  } else {
    training::load_complete_manifest(run);
    if (out.cfg.train.epochs == 0) throw IoError(dir + ": run has no checkpoint (0 epochs)");
    out.params = models::load_checkpoint(run.checkpoint(out.cfg.train.epochs));
  }
  return out;
}

data::ImageDataset eval_split(const RunConfig& cfg, const std::string& override_path) {
  const std::string path = override_path.empty() ? cfg.data.test : override_path;
  if (path.empty()) throw ConfigError("data.test: required for evaluation (or pass --data)");
  return data::load_dataset(path);
}

ordered_json calibration_json(const eval::CalibrationReport& r) {
  ordered_json bins = ordered_json::array();
  for (const auto& b : r.bins) {
    bins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"confidence", b.confidence},
                    {"accuracy", b.accuracy}, {"count", b.count}});
  }
  return {{"value", r.ece}, {"n_bins", r.n_bins}, {"bins", bins}};
}

ordered_json occlusion_json(const eval::OcclusionCurve& c) {
  return {{"ratios", c.ratios}, {"acc", c.accuracy}};
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot read");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<nlohmann::json> epoch_records(const RunLayout& run) {
  std::vector<nlohmann::json> out;
  for (const auto& line : read_lines(run.metrics())) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IoError(run.metrics().string() + ": malformed line");
    if (j.value("kind", "") == "epoch") out.push_back(std::move(j));
  }
  return out;
}

std::vector<double> field(const std::vector<nlohmann::json>& recs, const char* key) {
  std::vector<double> out;
  for (const auto& r : recs) {
    if (r.contains(key)) out.push_back(r.at(key).get<double>());
  }
  return out;
}

tome::MergeSchedule parse_schedule(const std::string& text, std::size_t depth) {
  std::vector<std::size_t> r;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) r.push_back(parse_seed(item.c_str(), "schedule"));
  if (r.size() == 1) return tome::MergeSchedule::constant(depth, r[0]);
  if (r.size() != depth) {
    throw ConfigError("schedule: " + std::to_string(r.size()) + " entries for depth " + std::to_string(depth));
  }
  return {r};
}

// One color per merge group, drawn from a seeded stream.
io::Raster source_map(const tome::SourceMatrix& src, const models::ViTConfig& cfg, std::uint64_t seed) {
  data::Rng rng(seed ^ 0x736f75726365ULL);
  std::vector<std::array<std::uint8_t, 3>> palette(src.group_count());
  for (auto& c : palette) {
    for (auto& v : c) v = static_cast<std::uint8_t>(40 + rng.below(216));
  }
  io::Raster r{cfg.image_w, cfg.image_h, 3, std::vector<std::uint8_t>(cfg.image_w * cfg.image_h * 3)};
  for (std::size_t y = 0; y < cfg.image_h; ++y) {
    for (std::size_t x = 0; x < cfg.image_w; ++x) {
      const std::size_t l = (y / cfg.patch) * cfg.grid_w() + x / cfg.patch;
      const auto& c = palette[src.group_of(l)];
      std::copy(c.begin(), c.end(), r.pixels.begin() + static_cast<std::ptrdiff_t>((y * cfg.image_w + x) * 3));
    }
  }
  return r;
}

}  // namespace

int gen_data(const GenDataOptions& o) {
  const data::ImageDataset ds = data::generate_shapes(o.shapes);
  data::save_dataset(ds, o.out);
  data::save_manifest(ds, o.shapes, o.out);
  if (o.captions) data::save_captions(data::generate_captions(o.shapes), o.out);
  std::cout << "wrote " << ds.size() << " images (" << ds.num_classes << " classes, " << ds.height << "x"
            << ds.width << ") to " << o.out << (o.captions ? " with captions" : "") << "\n";
  return 0;
}

int train(const TrainOptions& o) {
  nlohmann::json j = read_json(o.config);
  if (!j.is_object()) throw ConfigError(o.config + ": expected a JSON object");
  for (const auto& s : o.overrides) training::apply_override(j, s);
  if (!o.mode.empty()) j["mode"] = o.mode;
  if (!o.train_data.empty()) j["data"]["train"] = o.train_data;
  if (!o.test_data.empty()) j["data"]["test"] = o.test_data;
  training::RunOptions ro;
  ro.resume = o.resume;
  if (const char* env = std::getenv("MERGEMIX_SEED"); env != nullptr && *env != '\0') {
    j["seed"] = parse_seed(env, "MERGEMIX_SEED");
    ro.seed_source = "MERGEMIX_SEED";
    std::cerr << "mergemix: MERGEMIX_SEED=" << env << " overrides the config seed\n";
  }
  const RunConfig cfg = training::run_config_from_json(j);
  const auto result = training::execute_run(cfg, o.out, ro);
  std::cout << "trained " << to_string(cfg.train.mode) << "/" << to_string(cfg.train.variant) << " for "
            << result.state.epoch << " epochs (" << result.state.step << " steps) into " << o.out << "\n";
  return 0;
}

int mix(const MixOptions& o) {
  const data::ImageDataset ds = data::load_dataset(o.dataset);
  if (o.index_a >= ds.size()) throw DomainError("index-a: " + std::to_string(o.index_a) + " out of range");
  if (o.index_b >= ds.size()) throw DomainError("index-b: " + std::to_string(o.index_b) + " out of range");
  if (!(o.lambda >= 0.0 && o.lambda <= 1.0)) throw DomainError("lambda: must lie in [0, 1]");
  const std::string cfg_path =
      o.config.empty() ? (fs::path(o.checkpoint).parent_path().parent_path() / "config.json").string() : o.config;
  const RunConfig cfg = training::run_config_from_json(read_json(cfg_path));
  const models::ModelParams params = models::load_checkpoint(o.checkpoint);
  const bool captioner = params.size() && params.name(0).rfind(models::ToyCaptioner::kVisionPrefix, 0) == 0;
  const models::TrunkSaliency encoder(cfg.model, params, captioner ? models::ToyCaptioner::kVisionPrefix : "");
  const mixer::MixConfig mc = cfg.train.effective_mix(cfg.model.depth);

  const nx::Tensor a = ds.image(o.index_a), b = ds.image(o.index_b);
  data::Rng rng(o.seed);
  const mixer::MixPlan plan = mixer::mix_policy(a, b, o.lambda, encoder, mc, rng);

  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  auto put = [&](const char* name, const io::Raster& r) { io::write_pnm((dir / name).string(), io::upscale(r, o.scale)); };
  put("a.ppm", io::to_raster(a));
  put("b.ppm", io::to_raster(b));
  put("mixed.ppm", io::to_raster(plan.mixed_image));
  const recovery::PixelMask pm =
      recovery::mask_to_pixels(plan.mask, cfg.model.grid_h(), cfg.model.grid_w(), ds.height, ds.width);
  io::Raster mask{pm.width, pm.height, 1, {}};
  for (auto bit : pm.bits) mask.pixels.push_back(bit ? 255 : 0);
  put("mask.pgm", mask);
  put("source_map.ppm", source_map(plan.source, cfg.model, o.seed));

  ordered_json j;
  j["format"] = "mergemix-plan/1";
  j["index_a"] = o.index_a;
  j["index_b"] = o.index_b;
  j["lambda"] = o.lambda;
  j["lambda_hat"] = plan.lambda_hat;
  j["p"] = plan.mask.p;
  j["K"] = plan.merged_count;
  j["L0"] = plan.mask.size();
  j["degenerate"] = plan.degenerate;
  io::write_text((dir / "plan.json").string(), j.dump(2) + "\n");
  std::cout << j.dump() << "\n";
  return 0;
}

int eval(const EvalOptions& o) {
  const LoadedRun run = load_classifier(o.run, o.checkpoint);
  const data::ImageDataset split = eval_split(run.cfg, o.data);
  const models::TinyViT model(run.cfg.model);
  const eval::Predictions pred = eval::predict(model, run.params, split, run.cfg.train.forward_schedule);
  emit({{"accuracy", pred.accuracy()}, {"n", split.size()}}, o.out);
  return 0;
}

int calib(const EvalOptions& o) {
  const LoadedRun run = load_classifier(o.run, o.checkpoint);
  const data::ImageDataset split = eval_split(run.cfg, o.data);
  const models::TinyViT model(run.cfg.model);
  const eval::Predictions pred = eval::predict(model, run.params, split, run.cfg.train.forward_schedule);
  emit(calibration_json(eval::ece(pred.confidences, pred.correct, o.bins.value_or(run.cfg.eval.n_bins))), o.out);
  return 0;
}

int occlusion(const EvalOptions& o) {
  const LoadedRun run = load_classifier(o.run, o.checkpoint);
  const data::ImageDataset split = eval_split(run.cfg, o.data);
  const models::TinyViT model(run.cfg.model);
  const std::vector<double>& ratios = o.ratios.empty() ? run.cfg.eval.occlusion_ratios : o.ratios;
  const auto curve = eval::occlusion_eval(model, run.params, split, ratios,
                                          o.seed.value_or(run.cfg.eval.occlusion_seed), run.cfg.train.forward_schedule);
  emit(occlusion_json(curve), o.out);
  return 0;
}

int flops(const FlopsOptions& o) {
  eval::ArchSpec spec;
  tome::MergeSchedule sched;
  if (o.preset == "deit-small") {
    spec = eval::ArchSpec::deit_small();
  } else if (!o.preset.empty()) {
    throw ConfigError("preset: unknown preset " + o.preset);
  } else if (!o.config.empty()) {
    const RunConfig cfg = training::run_config_from_json(read_json(o.config));
    spec = eval::ArchSpec::from(cfg.model);
    sched = cfg.train.forward_schedule;
  } else {
    throw ConfigError("flops: pass --config or --preset");
  }
  if (o.r) sched = tome::MergeSchedule::constant(spec.depth, *o.r);
  if (!o.schedule.empty()) sched = parse_schedule(o.schedule, spec.depth);
  if (sched.layers() == 0) sched = tome::MergeSchedule::none(spec.depth);
  const auto est = eval::flops_estimate(spec, sched);
  const double base = eval::vit_flops(spec);
  ordered_json j;
  j["schedule"] = sched.r_per_layer;
  j["flops"] = est.flops;
  j["gflops"] = est.flops / 1e9;
  j["unmerged_flops"] = base;
  j["ratio"] = est.flops / base;
  j["tokens_per_layer"] = est.tokens_per_layer;
  emit(j, "");
  return 0;
}

int report(const ReportOptions& o) {
  const RunLayout run{o.run};
  const nlohmann::json manifest = training::load_complete_manifest(run);
  const RunConfig cfg = training::load_run_config(run);
  const auto epochs = epoch_records(run);
  if (epochs.size() != cfg.train.epochs) throw IoError(o.run + ": incomplete run (metrics end early)");

  ordered_json rep;
  rep["format"] = "mergemix-report/1";
  rep["mode"] = to_string(cfg.train.mode);
  rep["variant"] = to_string(cfg.train.variant);
  rep["config_hash"] = training::config_hash(training::to_json(cfg));
  rep["seed"] = cfg.train.seed;
  rep["epochs"] = cfg.train.epochs;

  std::vector<double> ep_axis;
  for (const auto& e : epochs) ep_axis.push_back(e.at("epoch").get<double>() + 1);
  const fs::path dir(o.run);
  const eval::ArchSpec arch = eval::ArchSpec::from(cfg.model);
  const tome::MergeSchedule fwd =
      cfg.train.forward_schedule.layers() ? cfg.train.forward_schedule : tome::MergeSchedule::none(cfg.model.depth);

  if (cfg.train.mode == training::Mode::kClassification) {
    const LoadedRun loaded = load_classifier(o.run, "");
    const data::ImageDataset split = eval_split(cfg, o.data);
    const models::TinyViT model(cfg.model);
    const eval::Predictions pred = eval::predict(model, loaded.params, split, fwd);
    const auto cal = eval::ece(pred.confidences, pred.correct, cfg.eval.n_bins);
    const auto occ = eval::occlusion_eval(model, loaded.params, split, cfg.eval.occlusion_ratios,
                                          cfg.eval.occlusion_seed, fwd);
    rep["accuracy"] = pred.accuracy();
    rep["accuracy_curve"] = {{"epoch", ep_axis}, {"train", field(epochs, "train_acc")},
                             {"test", field(epochs, "test_acc")}};
    rep["ece"] = calibration_json(cal);
    rep["occlusion"] = occlusion_json(occ);

    std::vector<io::Series> acc{{"train", ep_axis, field(epochs, "train_acc")}};
    if (!cfg.data.test.empty()) acc.push_back({"test", ep_axis, field(epochs, "test_acc")});
    io::write_text((dir / "accuracy.svg").string(),
                   io::line_plot({"Accuracy by epoch", "epoch", "top-1 accuracy"}, acc));
    std::vector<std::string> labels;
    std::vector<double> bar, mid;
    for (const auto& b : cal.bins) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", 0.5 * (b.lower + b.upper));
      labels.emplace_back(buf);
      bar.push_back(b.count ? b.accuracy : 0.0);
      mid.push_back(0.5 * (b.lower + b.upper));
    }
    char title[64];
    std::snprintf(title, sizeof title, "Reliability (ECE %.2f%%)", cal.ece);
    io::write_text((dir / "reliability.svg").string(),
                   io::bar_plot({title, "confidence", "accuracy"}, labels, bar, mid));
    io::write_text((dir / "occlusion.svg").string(),
                   io::line_plot({"Occlusion robustness", "occluded patch ratio", "top-1 accuracy"},
                                 {{"accuracy", occ.ratios, occ.accuracy}}));
  } else {
    const std::vector<double> gap = field(epochs, "heldout_gap");
    rep["preference"] = {{"train_gap", field(epochs, "gap")}, {"heldout_gap", gap},
                         {"final_heldout_gap", gap.empty() ? nlohmann::json() : nlohmann::json(gap.back())}};
    std::vector<io::Series> s{{"train", ep_axis, field(epochs, "gap")}};
    if (!gap.empty()) s.push_back({"held-out", ep_axis, gap});
    io::write_text((dir / "gap.svg").string(),
                   io::line_plot({"Winner minus loser score", "epoch", "s_w - s_l"}, s));
  }
  rep["flops"] = eval::flops_estimate(arch, fwd).flops;
  rep["flops_unmerged"] = eval::vit_flops(arch);
  rep["seed_source"] = manifest.value("seed_source", "config");
  io::write_text(run.report().string(), rep.dump(2) + "\n");
  std::cout << "wrote " << run.report().string() << "\n";
  return 0;
}

}  // namespace mergemix::cli
