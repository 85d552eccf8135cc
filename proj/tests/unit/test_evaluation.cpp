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

#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "mergemix/data/dataset.hpp"
#include "mergemix/data/rng.hpp"
#include "mergemix/error.hpp"
#include "mergemix/evaluation/metrics.hpp"

using namespace mergemix;
using namespace mergemix::eval;

namespace {

models::ViTConfig tiny_config(std::size_t classes) {
  models::ViTConfig cfg;
  cfg.image_h = cfg.image_w = 8;
  cfg.patch = 2;
  cfg.dim = 8;
  cfg.depth = 2;
  cfg.heads = 2;
  cfg.mlp_hidden = 8;
  cfg.num_classes = classes;
  return cfg;
}

data::ImageDataset shapes(std::size_t n, std::size_t classes) {
  data::ShapesConfig cfg;
  cfg.count = n;
  cfg.classes = classes;
  cfg.image_size = 8;
  return data::generate_shapes(cfg);
}

// Radical inverse in base 2.
double van_der_corput(std::uint32_t i) {
  double v = 0, f = 0.5;
  for (; i; i >>= 1, f *= 0.5) v += (i & 1) * f;
  return v;
}

}  // namespace

TEST_CASE("argmax ties go to the lower class") {
  const nx::Tensor logits = nx::Tensor::matrix({{1, 3, 3}, {2, 2, 2}, {0, -1, 5}});
  CHECK(argmax_row(logits, 0) == 1);
  CHECK(argmax_row(logits, 1) == 0);
  CHECK(argmax_row(logits, 2) == 2);
}

TEST_CASE("top1 counting") {
  const std::vector<std::size_t> labels{0, 1, 2, 3, 0, 1, 2, 3};
  const std::vector<std::size_t> zeros(8, 0);
  CHECK(top1_accuracy(zeros, labels) == 0.25);
  CHECK(top1_accuracy(labels, labels) == 1.0);
  CHECK_THROWS_AS(top1_accuracy(std::vector<std::size_t>{}, std::vector<std::size_t>{}), DomainError);
  CHECK_THROWS_AS(top1_accuracy(zeros, std::vector<std::size_t>{0}), DomainError);

  // Frozen from tests/oracles/eval_oracles.py.
  std::uint64_t x = 12345;
  std::vector<std::size_t> p, y;
  for (int i = 0; i < 100; ++i) {
    x = (1103515245 * x + 12345) % (std::uint64_t{1} << 31);
    p.push_back((x >> 16) % 5);
    x = (1103515245 * x + 12345) % (std::uint64_t{1} << 31);
    y.push_back((x >> 16) % 5);
  }
  CHECK(top1_accuracy(p, y) == 0.26);
}

TEST_CASE("constant model on a balanced set") {
  const models::TinyViT model(tiny_config(4));
  models::ModelParams params = model.init(3);
  for (double& v : params.get("head.w").data()) v = 0;
  params.get("head.b")[0] = 1.0;
  const auto ds = shapes(40, 4);
  const Predictions pred = predict(model, params, ds);
  CHECK(pred.accuracy() == 0.25);
  for (std::size_t c : pred.classes) CHECK(c == 0);
  CHECK(top1_accuracy(model, params, ds) == 0.25);
  CHECK_THROWS_AS(predict(model, params, ds.subset(std::vector<std::size_t>{})), DomainError);
}

TEST_CASE("ece closed forms") {
  // Two populated bins: |0.8 - 0.9| / 2 + |0.7 - 0.6| / 2.
  std::vector<double> conf;
  std::vector<bool> correct;
  for (int i = 0; i < 50; ++i) {
    conf.push_back(0.9);
    correct.push_back(i < 40);
  }
  for (int i = 0; i < 50; ++i) {
    conf.push_back(0.6);
    correct.push_back(i < 35);
  }
  const CalibrationReport r = ece(conf, correct);
  CHECK(std::abs(r.ece - 10.0) < 1e-9);
  CHECK(r.n_bins == 15);
  std::size_t total = 0;
  for (const auto& b : r.bins) total += b.count;
  CHECK(total == 100);

  const std::vector<double> ones(10, 1.0);
  std::vector<bool> half(10, false);
  for (int i = 0; i < 5; ++i) half[i] = true;
  const CalibrationReport sure = ece(ones, half);
  CHECK(sure.ece == 50.0);
  CHECK(sure.bins.back().count == 10);

  CHECK_THROWS_AS(ece(std::vector<double>{1.5}, std::vector<bool>{true}), DomainError);
  CHECK_THROWS_AS(ece(std::vector<double>{0.5}, std::vector<bool>{}), DomainError);
  CHECK_THROWS_AS(ece(ones, half, 0), DomainError);
  CHECK(ece(std::vector<double>{}, std::vector<bool>{}).ece == 0.0);
}

TEST_CASE("ece of a calibrated stream vanishes") {
  // Exactly calibrated per bin: 2b + 1 of 20 samples correct at (b + 0.5) / 10.
  std::vector<double> conf;
  std::vector<bool> correct;
  for (int b = 0; b < 10; ++b) {
    for (int i = 0; i < 20; ++i) {
      conf.push_back((b + 0.5) / 10.0);
      correct.push_back(i < 2 * b + 1);
    }
  }
  CHECK(ece(conf, correct, 10).ece < 1e-9);

  // Hammersley points: confidence i/N, correct iff the radical inverse of i
  // falls below it. Bernoulli draws would leave ~1% binomial noise at 1e4.
  for (std::size_t n : {1000u, 10000u}) {
    std::vector<double> c;
    std::vector<bool> hit;
    for (std::uint32_t i = 0; i < n; ++i) {
      c.push_back((i + 0.5) / n);
      hit.push_back(van_der_corput(i) < c.back());
    }
    const double e = ece(c, hit).ece;
    CHECK(e >= 0.0);
    if (n == 10000) CHECK(e < 0.5);
  }
}

TEST_CASE("occlusion patches are zeroed in place") {
  nx::Tensor img({1, 4, 4, 1}, 1.0);
  const std::vector<std::size_t> patches{3};
  occlude_patches(img, 0, patches, 2, 2);
  CHECK(img.at(0, 0) == 1.0);
  CHECK(img[2 * 4 + 2] == 0.0);
  CHECK(img[3 * 4 + 3] == 0.0);
  CHECK(img[1 * 4 + 1] == 1.0);
}

TEST_CASE("occlusion curve contract") {
  const models::TinyViT model(tiny_config(3));
  const models::ModelParams params = model.init(5);
  const auto ds = shapes(30, 3);
  const auto ratios = default_occlusion_ratios();
  const OcclusionCurve a = occlusion_eval(model, params, ds, ratios, 9);
  const OcclusionCurve b = occlusion_eval(model, params, ds, ratios, 9);
  CHECK(a.ratios == ratios);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.accuracy.front() == top1_accuracy(model, params, ds));
  for (double v : a.accuracy) CHECK((v >= 0.0 && v <= 1.0));
  CHECK_THROWS_AS(occlusion_eval(model, params, ds, std::vector<double>{0.2, 0.1}, 1), DomainError);
  CHECK_THROWS_AS(occlusion_eval(model, params, ds, std::vector<double>{1.0}, 1), DomainError);
}

TEST_CASE("flops closed forms") {
  ArchSpec tiny{4, 3, 2, 1, 4, 2, true};
  CHECK(flops_estimate(tiny, {}).flops == 576);  // frozen from eval_oracles.py
  CHECK(flops_estimate(tiny, tome::MergeSchedule::constant(1, 1)).flops == 544);
  CHECK(vit_flops(tiny) == 576);

  const ArchSpec deit = ArchSpec::deit_small();
  const CostEstimate base = flops_estimate(deit, tome::MergeSchedule::none(12));
  CHECK(base.flops == vit_flops(deit));
  CHECK(base.flops == 9197764608.0);
  const CostEstimate r13 = flops_estimate(deit, tome::MergeSchedule::constant(12, 13));
  CHECK(r13.flops / base.flops == doctest::Approx(0.587686502359335).epsilon(1e-12));
  CHECK(r13.tokens_per_layer.front() == 197);
  CHECK(r13.tokens_per_layer.back() == 197 - 12 * 13);
  CHECK_THROWS_AS(flops_estimate(deit, tome::MergeSchedule::none(3)), ConfigError);
  CHECK_THROWS_AS(flops_estimate(deit, tome::MergeSchedule::constant(12, 99)), DomainError);
}

TEST_CASE("flops strictly decrease in every layer's r") {
  data::Rng rng(17);
  const ArchSpec deit = ArchSpec::deit_small();
  for (int trial = 0; trial < 200; ++trial) {
    tome::MergeSchedule s = tome::MergeSchedule::none(12);
    for (auto& r : s.r_per_layer) r = rng.below(8);
    const double before = flops_estimate(deit, s).flops;
    const std::size_t layer = rng.below(12);
    s.r_per_layer[layer] += 1;
    CHECK(flops_estimate(deit, s).flops < before);
  }
}

TEST_CASE("arch spec from a model config") {
  const ArchSpec s = ArchSpec::from(tiny_config(3));
  CHECK(s.patches == 16);
  CHECK(s.patch_dim == 12);
  CHECK(s.tokens() == 16);
  CHECK(flops_estimate(s, {}).tokens_per_layer == std::vector<std::size_t>{16, 16, 16});
}
