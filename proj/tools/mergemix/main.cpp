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

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "json.hpp"
#include "mergemix/error.hpp"

namespace {

// Exit codes: 0 ok, 2 configuration or usage, 3 numeric abort, 4 I/O.
constexpr int kConfig = 2, kNumeric = 3, kIo = 4;

int fail(int code, const std::string& msg) {
  std::cerr << "mergemix: error: " << msg << "\n";
  return code;
}

void add_eval_flags(CLI::App* cmd, mergemix::cli::EvalOptions& o) {
  cmd->add_option("--run", o.run, "Run directory")->required();
  cmd->add_option("--data", o.data, "Dataset to evaluate (default: the run's data.test)");
  cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint (default: the final epoch)");
  cmd->add_option("--out", o.out, "Also write the JSON result here");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace mergemix;
  CLI::App app{"MergeMix lab: token-merging mixup for tiny vision transformers"};
  app.require_subcommand(1, 1);

  cli::GenDataOptions gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic shapes dataset (MMX1)");
  g->add_option("--out", gen.out, "Output .mmx1 path")->required();
  g->add_option("--count", gen.shapes.count)->capture_default_str();
  g->add_option("--classes", gen.shapes.classes)->capture_default_str();
  g->add_option("--image-size", gen.shapes.image_size)->capture_default_str();
  g->add_option("--seed", gen.shapes.seed)->capture_default_str();
  g->add_option("--noise", gen.shapes.noise)->capture_default_str();
  g->add_option("--texture", gen.shapes.texture)->capture_default_str();
  g->add_option("--color-jitter", gen.shapes.color_jitter)->capture_default_str();
  g->add_option("--distractors", gen.shapes.distractors)->capture_default_str();
  g->add_flag("--captions", gen.captions, "Also write the caption sidecar for preference training");

  cli::TrainOptions tr;
  auto add_train_flags = [&tr](CLI::App* cmd, bool with_mode) {
    cmd->add_option("--config", tr.config, "Run config JSON")->required();
    cmd->add_option("--out", tr.out, "Run directory")->required();
    if (with_mode) cmd->add_option("--mode", tr.mode, "cls or pref (default: the config's mode)")
                       ->check(CLI::IsMember({"cls", "pref"}));
    cmd->add_option("--set", tr.overrides, "Override a config key, e.g. --set mix.alpha=0.4");
    cmd->add_option("--train", tr.train_data, "Override data.train");
    cmd->add_option("--test", tr.test_data, "Override data.test");
    cmd->add_flag("--resume", tr.resume, "Continue from the run's state.mmxs");
  };
  auto* t = app.add_subcommand("train", "Train a classifier or a captioner into a run directory");
  add_train_flags(t, true);
  auto* tc = app.add_subcommand("train-cls", "Same as train --mode cls");
  add_train_flags(tc, false);
  auto* tp = app.add_subcommand("train-pref", "Same as train --mode pref");
  add_train_flags(tp, false);

  cli::MixOptions mx;
  auto* m = app.add_subcommand("mix", "Mix two images with a trained model and dump the plan");
  m->add_option("--dataset", mx.dataset)->required();
  m->add_option("--index-a", mx.index_a)->required();
  m->add_option("--index-b", mx.index_b)->required();
  m->add_option("--lambda", mx.lambda)->required();
  m->add_option("--checkpoint", mx.checkpoint)->required();
  m->add_option("--config", mx.config, "Run config (default: <checkpoint>/../../config.json)");
  m->add_option("--out-dir", mx.out_dir)->required();
  m->add_option("--seed", mx.seed, "Seed for the mixing draws and the source-map palette")->capture_default_str();
  m->add_option("--scale", mx.scale, "Integer upscale of the dumped images")->capture_default_str()
      ->check(CLI::Range(1, 64));

  cli::EvalOptions ev, ca, oc;
  auto* e = app.add_subcommand("eval", "Top-1 accuracy of a trained classifier");
  add_eval_flags(e, ev);
  auto* c = app.add_subcommand("calib", "Expected calibration error with reliability bins");
  add_eval_flags(c, ca);
  std::size_t bins = 0;
  c->add_option("--bins", bins, "Number of bins (default: eval.n_bins)");
  auto* o = app.add_subcommand("occlusion", "Accuracy as random patches are zeroed");
  add_eval_flags(o, oc);
  o->add_option("--ratios", oc.ratios, "Occlusion ratios (default: eval.occlusion_ratios)");
  std::uint64_t occ_seed = 0;
  auto* occ_seed_opt = o->add_option("--seed", occ_seed, "Patch permutation seed (default: eval.occlusion_seed)");

  cli::FlopsOptions fl;
  auto* f = app.add_subcommand("flops", "Analytic FLOPs of a merge schedule");
  f->add_option("--config", fl.config, "Run config supplying the architecture");
  f->add_option("--preset", fl.preset, "deit-small");
  std::size_t r = 0;
  auto* r_opt = f->add_option("--r", r, "Tokens merged in every layer");
  f->add_option("--schedule", fl.schedule, "Comma-separated tokens merged per layer");

  cli::ReportOptions rp;
  auto* rep = app.add_subcommand("report", "Write report.json and SVG plots for a finished run");
  rep->add_option("--run", rp.run)->required();
  rep->add_option("--data", rp.data, "Evaluation dataset (default: the run's data.test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kConfig;
  }

  try {
    if (g->parsed()) return cli::gen_data(gen);
    if (t->parsed()) return cli::train(tr);
    if (tc->parsed()) {
      tr.mode = "cls";
      return cli::train(tr);
    }
    if (tp->parsed()) {
      tr.mode = "pref";
      return cli::train(tr);
    }
    if (m->parsed()) return cli::mix(mx);
    if (e->parsed()) return cli::eval(ev);
    if (c->parsed()) {
      if (c->count("--bins")) ca.bins = bins;
      return cli::calib(ca);
    }
    if (o->parsed()) {
      if (occ_seed_opt->count()) oc.seed = occ_seed;
      return cli::occlusion(oc);
    }
    if (f->parsed()) {
      if (r_opt->count()) fl.r = r;
      return cli::flops(fl);
    }
    if (rep->parsed()) return cli::report(rp);
  } catch (const ConfigError& err) {
    return fail(kConfig, err.what());
  } catch (const DomainError& err) {
    return fail(kConfig, err.what());
  } catch (const ShapeError& err) {
    return fail(kConfig, err.what());
  } catch (const NumericError& err) {
    return fail(kNumeric, err.what());
  } catch (const IoError& err) {
    return fail(kIo, err.what());
  } catch (const std::filesystem::filesystem_error& err) {
    return fail(kIo, err.what());
  } catch (const nlohmann::json::exception& err) {
    return fail(kConfig, err.what());
  } catch (const std::exception& err) {
    return fail(1, err.what());
  }
  return kConfig;
}
