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
#include <numbers>
#include <vector>

#include "doctest.h"
#include "mergemix/data/rng.hpp"
#include "mergemix/error.hpp"
#include "mergemix/numerics/grad_check.hpp"
#include "mergemix/objectives/losses.hpp"

using namespace mergemix;
using namespace mergemix::objectives;
using nx::Tape;
using nx::Tensor;
using nx::Var;

namespace {

const double kLn2 = std::numbers::ln2;

double value_of(Var v) { return v.value()[0]; }

Tensor random_matrix(std::size_t r, std::size_t c, data::Rng& rng) {
  Tensor t({r, c});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("mce closed forms") {
  data::Rng rng(1);
  const Tensor logits = random_matrix(3, 4, rng);
  const std::vector<std::size_t> yi{0, 1, 2}, yj{3, 3, 1};
  Tape tape;
  Var x = tape.constant(logits);
  const double ce_i = value_of(nx::cross_entropy(x, yi));
  const double ce_j = value_of(nx::cross_entropy(x, yj));
  CHECK(value_of(mce_loss(x, yi, yj, std::vector<double>(3, 1.0))) == doctest::Approx(ce_i).epsilon(1e-14));
  CHECK(value_of(mce_loss(x, yi, yj, std::vector<double>(3, 0.0))) == doctest::Approx(ce_j).epsilon(1e-14));
  CHECK(value_of(mce_loss(x, yi, yj, std::vector<double>(3, 0.5))) ==
        doctest::Approx(0.5 * ce_i + 0.5 * ce_j).epsilon(1e-14));
  CHECK(value_of(mce_loss(x, yi, yi, std::vector<double>(3, 0.3))) == doctest::Approx(ce_i).epsilon(1e-14));

  Var u = tape.constant(Tensor({2, 2}, 0.0));
  const std::vector<std::size_t> a{0, 1}, b{1, 0};
  CHECK(std::abs(value_of(mce_loss(u, a, b, std::vector<double>(2, 0.37))) - kLn2) < 1e-12);
  CHECK_THROWS_AS(mce_loss(u, a, b, std::vector<double>(2, 1.2)), DomainError);
  CHECK_THROWS_AS(mce_loss(u, std::vector<std::size_t>{0, 5}, b, std::vector<double>(2, 0.5)), DomainError);
}

TEST_CASE("mce is linear in lambda_hat") {
  data::Rng rng(2);
  Tape tape;
  Var x = tape.constant(random_matrix(4, 3, rng));
  const std::vector<std::size_t> yi{0, 1, 2, 0}, yj{1, 2, 0, 2};
  const double a = value_of(mce_loss(x, yi, yj, std::vector<double>(4, 1.0)));
  const double b = value_of(mce_loss(x, yi, yj, std::vector<double>(4, 0.0)));
  for (double l : {0.1, 0.25, 0.8}) {
    CHECK(value_of(mce_loss(x, yi, yj, std::vector<double>(4, l))) ==
          doctest::Approx(l * a + (1 - l) * b).epsilon(1e-13));
  }
}

TEST_CASE("total_cls_loss collapses to twice CE") {
  data::Rng rng(3);
  Tape tape;
  Var x = tape.constant(random_matrix(2, 3, rng));
  const std::vector<std::size_t> y{2, 0};
  const double ce = value_of(nx::cross_entropy(x, y));
  CHECK(value_of(total_cls_loss(x, x, y, y, std::vector<double>(2, 1.0))) ==
        doctest::Approx(2 * ce).epsilon(1e-14));
}

TEST_CASE("total_cls_loss gradient matches finite differences") {
  data::Rng rng(4);
  const std::vector<std::size_t> yi{0, 2, 1}, yj{1, 1, 0};
  const std::vector<double> lam{0.2, 0.9, 0.5};
  const Tensor w = random_matrix(4, 3, rng), xr = random_matrix(3, 4, rng), xm = random_matrix(3, 4, rng);
  const auto report = nx::grad_check(
      [&](Tape& t, const std::vector<Var>& p) {
        Var mixed = nx::matmul(nx::gelu(t.constant(xm)), p[0]);
        Var raw = nx::matmul(nx::gelu(t.constant(xr)), p[0]);
        return total_cls_loss(mixed, raw, yi, yj, lam);
      },
      {w});
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("sft closed forms") {
  Tape tape;
  Var zero = tape.constant(Tensor({2, 3}, 0.0));
  const std::vector<std::size_t> len{3, 3};
  CHECK(value_of(sft_loss(zero, len)) == 0.0);
  const double v = 7.0;
  Var uniform = tape.constant(Tensor({1, 3}, -std::log(v)));
  CHECK(value_of(sft_loss(uniform, std::vector<std::size_t>{3})) == doctest::Approx(3 * std::log(v)).epsilon(1e-14));
  CHECK_THROWS_AS(sft_loss(zero, std::vector<std::size_t>{0, 3}), DomainError);
}

TEST_CASE("sft equals summed cross-entropy over positions") {
  data::Rng rng(5);
  const Tensor logits = random_matrix(3, 6, rng);  // three positions, vocab 6
  const std::vector<std::size_t> target{4, 1, 5};
  Tape tape;
  Var x = tape.constant(logits);
  Var lp = nx::reshape(nx::scale(nx::nll_rows(x, target), -1.0), {1, 3});
  const double ce_sum = 3 * value_of(nx::cross_entropy(x, target));
  CHECK(value_of(sft_loss(lp, std::vector<std::size_t>{3})) == doctest::Approx(ce_sum).epsilon(1e-13));
}

TEST_CASE("avg_logprob_score") {
  CHECK(avg_logprob_score(-8.0, 4, 2.0) == -4.0);
  CHECK(avg_logprob_score(-8.0, 4, 4.0) == 2 * avg_logprob_score(-8.0, 4, 2.0));
  CHECK_THROWS_AS(avg_logprob_score(-1.0, 0, 2.0), DomainError);
  Tape tape;
  Var a = tape.constant(Tensor::matrix({{-1, -3, -4, -100}}));
  Var b = tape.constant(Tensor::matrix({{-1, -3, -4, 0}}));
  const std::vector<std::size_t> len{3};
  CHECK(value_of(avg_logprob_score(a, len, 2.0)) == value_of(avg_logprob_score(b, len, 2.0)));
  CHECK(value_of(avg_logprob_score(a, len, 2.0)) == avg_logprob_score(-8.0, 3, 2.0));
}

TEST_CASE("mixed simpo closed forms") {
  CHECK(std::abs(mixed_simpo_loss({0.3, 0.0, 0.3}) - kLn2) < 1e-12);
  CHECK(std::abs(mixed_simpo_loss({0.5, 0.5, 0.0}) - kLn2) < 1e-12);
  CHECK(std::abs(mixed_simpo_loss({2.5, 0.0, 0.5}) - 0.126928) < 1e-6);
  CHECK(std::abs(neg_log_sigmoid(1.0) - 0.313262) < 1e-6);
  CHECK(std::abs(neg_log_sigmoid(2.0) - 0.126928) < 1e-6);
  CHECK(neg_log_sigmoid(-800.0) == doctest::Approx(800.0));
  CHECK(std::isfinite(neg_log_sigmoid(800.0)));
}

TEST_CASE("mixed simpo monotonicity and margin consistency") {
  data::Rng rng(6);
  for (int i = 0; i < 10000; ++i) {
    const double sw = 3 * rng.normal(), sl = 3 * rng.normal();
    const double m = rng.uniform(), d = 0.01 + rng.uniform();
    CHECK(mixed_simpo_loss({sw + d, sl, m}) < mixed_simpo_loss({sw, sl, m}));
    CHECK(mixed_simpo_loss({sw, sl, std::min(1.0, m + d)}) >= mixed_simpo_loss({sw, sl, m}));
    if (sw > sl) CHECK(mixed_simpo_loss({sw, sl, 0.1}) < mixed_simpo_loss({sw, sl, 0.9}));
  }
}

TEST_CASE("dpo closed forms") {
  CHECK(std::abs(dpo_loss(-3.0, -5.0, -3.0, -5.0, 2.0) - kLn2) < 1e-12);
  CHECK(std::abs(dpo_loss(1.0, 0.0, 0.0, 0.0, 1.0) - 0.313262) < 1e-6);
  CHECK(dpo_loss(500.0, -500.0, 0.0, 0.0, 1.0) < 1e-300);
}

TEST_CASE("tape losses agree with scalar forms") {
  Tape tape;
  Var sw = tape.constant(Tensor::vector({0.4, -1.0}));
  Var sl = tape.constant(Tensor::vector({0.1, 0.5}));
  const std::vector<double> m{0.2, 0.7};
  const double expect = 0.5 * (mixed_simpo_loss({0.4, 0.1, 0.2}) + mixed_simpo_loss({-1.0, 0.5, 0.7}));
  CHECK(value_of(mixed_simpo_loss(sw, sl, m)) == doctest::Approx(expect).epsilon(1e-14));
  const std::vector<double> rw{-0.2, 0.3}, rl{0.0, 0.1};
  const double dexp = 0.5 * (dpo_loss(0.4, 0.1, -0.2, 0.0, 2.0) + dpo_loss(-1.0, 0.5, 0.3, 0.1, 2.0));
  CHECK(value_of(dpo_loss(sw, sl, rw, rl, 2.0)) == doctest::Approx(dexp).epsilon(1e-14));
  CHECK(total_mllm_loss(0.5, 0.693147) == doctest::Approx(1.193147).epsilon(1e-15));
}

TEST_CASE("preference loss gradients") {
  data::Rng rng(7);
  const std::vector<std::size_t> len{2, 3};
  const std::vector<double> margin{0.3, 0.6};
  const auto report = nx::grad_check(
      [&](Tape& t, const std::vector<Var>& p) {
        (void)t;
        Var lw = nx::log_softmax_rows(p[0]);
        Var ll = nx::log_softmax_rows(p[1]);
        Var sw = avg_logprob_score(lw, len, 2.0), sl = avg_logprob_score(ll, len, 2.0);
        return total_mllm_loss(sft_loss(lw, len), mixed_simpo_loss(sw, sl, margin));
      },
      {random_matrix(2, 3, rng), random_matrix(2, 3, rng)});
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("total loss gradient is the sum of component gradients") {
  data::Rng rng(8);
  Tensor p = random_matrix(2, 3, rng);
  p.set_requires_grad(true);
  const std::vector<std::size_t> len{3, 2};
  const std::vector<double> margin{0.5, 0.5};
  auto grad_of = [&](int which) {
    Tape t;
    Var x = t.leaf(p);
    Var lp = nx::log_softmax_rows(x);
    Var s = avg_logprob_score(lp, len, 2.0);
    Var sft = sft_loss(lp, len);
    Var simpo = mixed_simpo_loss(s, nx::scale(s, 0.5), margin);
    t.backward(which == 0 ? sft : which == 1 ? simpo : total_mllm_loss(sft, simpo));
    return t.grad(x);
  };
  const Tensor a = grad_of(0), b = grad_of(1), c = grad_of(2);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(a[i] + b[i]).epsilon(1e-13));
}
