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

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A scratch directory shared by every case, rebuilt once per process.
const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "mergemix_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Result run(const std::string& args, const std::string& env = "") {
  const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = "cd '" + scratch().string() + "' && " + env + " '" MERGEMIX_CLI "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

constexpr const char* kConfig = R"({"lr": 0.01, "epochs": 2, "batch_size": 20, "variant": "mergemix",
  "model": {"image_h": 8, "image_w": 8, "patch": 2, "dim": 8, "depth": 2, "heads": 2, "mlp_hidden": 16,
            "num_classes": 5},
  "captioner": {"vocab": 19, "text_depth": 1},
  "mix": {"merge_schedule": [2, 2]}, "data": {"train": "train.mmx1", "test": "test.mmx1"},
  "eval": {"n_bins": 10}})";

// Data, config and one finished classification run, made once.
void prepare() {
  static bool done = false;
  if (done) return;
  std::ofstream(scratch() / "cfg.json") << kConfig;
  nlohmann::json no_lr = nlohmann::json::parse(kConfig);
  no_lr.erase("lr");
  std::ofstream(scratch() / "nolr.json") << no_lr.dump();
  REQUIRE(run("gen-data --out train.mmx1 --count 120 --image-size 8 --captions").code == 0);
  REQUIRE(run("gen-data --out test.mmx1 --count 40 --image-size 8 --seed 2 --captions").code == 0);
  REQUIRE(run("gen-data --out plain.mmx1 --count 40 --image-size 8 --seed 3").code == 0);
  REQUIRE(run("train --config cfg.json --out run_a").code == 0);
  done = true;
}

}  // namespace

TEST_CASE("gen-data writes the dataset with its sidecars") {
  prepare();
  CHECK(fs::exists(scratch() / "train.mmx1"));
  CHECK(fs::exists(scratch() / "train.mmx1.captions.json"));
  CHECK(fs::exists(scratch() / "train.mmx1.manifest.json"));
  CHECK_FALSE(fs::exists(scratch() / "plain.mmx1.captions.json"));
  CHECK(read_json(scratch() / "train.mmx1.manifest.json").at("seed") == 1);
}

TEST_CASE("train populates the run directory deterministically") {
  prepare();
  const fs::path a = scratch() / "run_a";
  for (const char* f : {"config.json", "run.json", "metrics.jsonl", "state.mmxs", "checkpoints/epoch_1.mmxc",
                        "checkpoints/epoch_2.mmxc"}) {
    CAPTURE(f);
    CHECK(fs::exists(a / f));
  }
  CHECK(read_json(a / "run.json").at("status") == "complete");
  REQUIRE(run("train-cls --config cfg.json --out run_b").code == 0);
  CHECK(slurp(a / "metrics.jsonl") == slurp(scratch() / "run_b" / "metrics.jsonl"));
  CHECK(slurp(a / "checkpoints/epoch_2.mmxc") == slurp(scratch() / "run_b" / "checkpoints/epoch_2.mmxc"));

  std::istringstream lines(slurp(a / "metrics.jsonl"));
  std::size_t steps = 0, epochs = 0;
  for (std::string line; std::getline(lines, line);) {
    const auto j = nlohmann::json::parse(line);
    (j.at("kind") == "step" ? steps : epochs) += 1;
  }
  CHECK(steps == 12);
  CHECK(epochs == 2);
}

TEST_CASE("config errors name the field and exit 2") {
  prepare();
  const Result r = run("train --config nolr.json --out bad");
  CHECK(r.code == 2);
  CHECK(r.err.find("lr: required") != std::string::npos);
  const Result u = run("train --config cfg.json --out bad --set mix.alpah=1");
  CHECK(u.code == 2);
  CHECK(u.err.find("mix.alpah: unknown field") != std::string::npos);
  CHECK(run("").code == 2);
  CHECK(run("train --config cfg.json").code == 2);
}

TEST_CASE("preference mode needs captions") {
  prepare();
  const Result r = run("train --mode pref --config cfg.json --out p_bad --train plain.mmx1");
  CHECK(r.code == 4);
  CHECK(r.err.find("captions required") != std::string::npos);
  const Result ok = run("train-pref --config cfg.json --out p_ok --set epochs=1");
  CHECK(ok.code == 0);
  CHECK(read_json(scratch() / "p_ok" / "run.json").at("mode") == "pref");
}

TEST_CASE("a non-finite run exits 3") {
  prepare();
  const Result r = run("train --config cfg.json --out nan_run --set lr=1e300 --set warmup_fraction=0");
  CHECK(r.code == 3);
  CHECK(r.err.find("non-finite value at epoch 0") != std::string::npos);
}

TEST_CASE("MERGEMIX_SEED overrides the seed and is recorded") {
  prepare();
  REQUIRE(run("train --config cfg.json --out seeded --set epochs=1", "MERGEMIX_SEED=42").code == 0);
  const auto m = read_json(scratch() / "seeded" / "run.json");
  CHECK(m.at("seed") == 42);
  CHECK(m.at("seed_source") == "MERGEMIX_SEED");
  CHECK(read_json(scratch() / "seeded" / "config.json").at("seed") == 42);
  CHECK(run("train --config cfg.json --out seeded2", "MERGEMIX_SEED=abc").code == 2);
}

TEST_CASE("mix dumps images and the plan") {
  prepare();
  const std::string base = "mix --dataset test.mmx1 --index-a 1 --index-b 4 --checkpoint run_a/checkpoints/epoch_2.mmxc";
  REQUIRE(run(base + " --lambda 1.0 --out-dir mix1").code == 0);
  CHECK(slurp(scratch() / "mix1/mixed.ppm") == slurp(scratch() / "mix1/a.ppm"));
  REQUIRE(run(base + " --lambda 0.0 --out-dir mix0").code == 0);
  CHECK(slurp(scratch() / "mix0/mixed.ppm") == slurp(scratch() / "mix0/b.ppm"));
  REQUIRE(run(base + " --lambda 0.37 --out-dir mixh --scale 4").code == 0);
  const auto plan = read_json(scratch() / "mixh/plan.json");
  CHECK(plan.at("L0") == 16);
  CHECK(plan.at("p") == static_cast<int>(std::floor(0.37 * 16)));
  CHECK(plan.at("K") == 12);  // 16 - 2 - 2
  for (const char* f : {"a.ppm", "b.ppm", "mixed.ppm", "mask.pgm", "source_map.ppm"}) {
    CAPTURE(f);
    CHECK(slurp(scratch() / "mixh" / f).rfind(std::string(f).ends_with(".pgm") ? "P5\n32 32\n" : "P6\n32 32\n", 0) ==
          0);
  }
  CHECK(run(base + " --lambda 0.5 --index-a 400 --out-dir bad").code == 2);
  CHECK(run(base + " --lambda 1.5 --out-dir bad").code == 2);
}

TEST_CASE("eval, calib, occlusion and flops print JSON") {
  prepare();
  const Result e = run("eval --run run_a");
  REQUIRE(e.code == 0);
  const auto acc = nlohmann::json::parse(e.out);
  CHECK(acc.at("n") == 40);
  const Result c = run("calib --run run_a");
  REQUIRE(c.code == 0);
  CHECK(nlohmann::json::parse(c.out).at("bins").size() == 10);
  const Result c5 = run("calib --run run_a --bins 5");
  CHECK(nlohmann::json::parse(c5.out).at("bins").size() == 5);
  const Result o = run("occlusion --run run_a --ratios 0 0.5 --seed 3");
  REQUIRE(o.code == 0);
  CHECK(nlohmann::json::parse(o.out).at("acc").size() == 2);
  const Result f = run("flops --preset deit-small");
  REQUIRE(f.code == 0);
  CHECK(nlohmann::json::parse(f.out).at("flops") == 9197764608.0);
  const Result fr = run("flops --config cfg.json --r 1");
  REQUIRE(fr.code == 0);
  CHECK(nlohmann::json::parse(fr.out).at("ratio").get<double>() < 1.0);
  CHECK(run("eval --run missing").code == 4);
  CHECK(run("eval --run p_ok").code == 2);
}

TEST_CASE("report follows the schema and is idempotent") {
  prepare();
  REQUIRE(run("report --run run_a").code == 0);
  const fs::path a = scratch() / "run_a";
  const auto rep = read_json(a / "report.json");
  for (const char* k : {"format", "config_hash", "accuracy", "ece", "occlusion", "flops"}) {
    CAPTURE(k);
    CHECK(rep.contains(k));
  }
  CHECK(rep.at("format") == "mergemix-report/1");
  CHECK(rep.at("ece").at("bins").size() == 10);
  CHECK(rep.at("occlusion").at("ratios").size() == rep.at("occlusion").at("acc").size());
  CHECK(rep.at("config_hash") == read_json(a / "run.json").at("config_hash"));
  CHECK(slurp(a / "reliability.svg").find("<svg") != std::string::npos);

  std::vector<std::string> before;
  for (const char* f : {"report.json", "accuracy.svg", "reliability.svg", "occlusion.svg"}) before.push_back(slurp(a / f));
  REQUIRE(run("report --run run_a").code == 0);
  std::size_t i = 0;
  for (const char* f : {"report.json", "accuracy.svg", "reliability.svg", "occlusion.svg"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == before[i++]);
  }

  fs::create_directories(scratch() / "half");
  std::ofstream(scratch() / "half" / "run.json") << R"({"format": "mergemix-run/1", "status": "running"})";
  const Result r = run("report --run half");
  CHECK(r.code == 4);
  CHECK(r.err.find("incomplete run") != std::string::npos);
}
