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
#include <string>
#include <vector>

#include "doctest.h"
#include "mergemix/data/rng.hpp"
#include "mergemix/error.hpp"
#include "mergemix/numerics/grad_check.hpp"
#include "mergemix/numerics/kernels.hpp"
#include "mergemix/numerics/ops.hpp"

using namespace mergemix;
using namespace mergemix::nx;

namespace {

Tensor random_tensor(Shape shape, data::Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("matmul identity cases") {
  Tape tape;
  Var eye = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  Var a = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  CHECK(matmul(eye, eye).value() == Tensor::matrix({{1, 0}, {0, 1}}));
  CHECK(matmul(a, eye).value() == Tensor::matrix({{1, 2}, {3, 4}}));
}

TEST_CASE("matmul rejects mismatched inner dims") {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({2, 3}));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("grad of sum(A*B) w.r.t. A is row sums of B, checked by finite differences") {
  data::Rng rng(3);
  const Tensor b_val = random_tensor({3, 4}, rng);
  const Tensor a_val = random_tensor({2, 3}, rng);

  Tape tape;
  Tensor a_leaf = a_val;
  a_leaf.set_requires_grad(true);
  Var a = tape.leaf(a_leaf);
  Var b = tape.constant(b_val);
  tape.backward(sum(matmul(a, b)));
  const Tensor g = tape.grad(a);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t p = 0; p < 3; ++p) {
      double row = 0.0;
      for (std::size_t j = 0; j < 4; ++j) row += b_val.at(p, j);
      CHECK(g.at(i, p) == doctest::Approx(row).epsilon(1e-12));
    }
  }
  const double rel = grad_check(
      [&b_val](Var x) {
        Var bb = x.tape().constant(b_val);
        return sum(matmul(x, bb));
      },
      a_val, 1e-5);
  CHECK(rel < 1e-6);
}

TEST_CASE("softmax_rows closed forms") {
  Tape tape;
  Var x = tape.constant(Tensor::matrix({{0, 0}, {1000, 0}}));
  const Tensor y = softmax_rows(x).value();
  CHECK(y.at(0, 0) == doctest::Approx(0.5));
  CHECK(y.at(0, 1) == doctest::Approx(0.5));
  CHECK(y.at(1, 0) == doctest::Approx(1.0));
  CHECK(y.at(1, 1) == doctest::Approx(0.0));

  Var z = tape.constant(Tensor::matrix({{std::log(1.0), std::log(2.0), std::log(3.0)}}));
  const Tensor w = softmax_rows(z).value();
  CHECK(w[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-14));
  CHECK(w[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one within 1e-12 (property)") {
  data::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(20);
    const Tensor y = softmax_rows(random_tensor({rows, cols}, rng, 30.0));
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += y.at(r, c);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("cross_entropy closed forms and domain") {
  Tape tape;
  const std::vector<std::size_t> zero{0};
  Var uniform = tape.constant(Tensor::matrix({{0.3, 0.3}}));
  CHECK(cross_entropy(uniform, zero).value()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  Var logits = tape.constant(Tensor::matrix({{1, 2, 3}}));
  const std::vector<std::size_t> two{2};
  CHECK(cross_entropy(logits, two).value()[0] == doctest::Approx(0.4076059644).epsilon(1e-9));

  double previous = 1e9;
  for (double margin : {1.0, 5.0, 20.0, 100.0}) {
    Var m = tape.constant(Tensor::matrix({{margin, 0.0}}));
    const double loss = cross_entropy(m, zero).value()[0];
    CHECK(loss < previous);
    CHECK(loss >= 0.0);
    previous = loss;
  }
  CHECK(previous < 1e-40);

  const std::vector<std::size_t> bad{3};
  CHECK_THROWS_AS(cross_entropy(logits, bad), DomainError);
}

TEST_CASE("cross_entropy is non-negative (property)") {
  data::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 1 + rng.below(5), c = 2 + rng.below(6);
    std::vector<std::size_t> labels(b);
    for (auto& l : labels) l = rng.below(c);
    Tape tape;
    Var x = tape.constant(random_tensor({b, c}, rng, 10.0));
    CHECK(cross_entropy(x, labels).value()[0] >= 0.0);
  }
}

TEST_CASE("grad_check trivial cases") {
  const double rel = grad_check([](Var x) { return sum(mul(x, x)); }, Tensor::vector({3.0}));
  CHECK(rel < 1e-6);

  Tape tape;
  Tensor leaf = Tensor::vector({3.0});
  leaf.set_requires_grad(true);
  Var x = tape.leaf(leaf);
  tape.backward(sum(mul(x, x)));
  CHECK(tape.grad(x)[0] == doctest::Approx(6.0).epsilon(1e-12));

  ScalarFn constant = [](Tape& t, const std::vector<Var>& p) {
    return add(scale(sum(p[0]), 0.0), t.constant(Tensor::scalar(4.0)));
  };
  const GradCheckReport r = grad_check(constant, {Tensor::vector({1.0, 2.0})});
  CHECK(r.max_abs_error == 0.0);
  Tape t2;
  Tensor l2 = Tensor::vector({1.0, 2.0});
  l2.set_requires_grad(true);
  Var v = t2.leaf(l2);
  t2.backward(constant(t2, {v}));
  CHECK(t2.grad(v)[0] == 0.0);
  CHECK(t2.grad(v)[1] == 0.0);
}

TEST_CASE("every differentiable primitive passes grad_check below 1e-4") {
  data::Rng rng(2024);
  auto check = [](const char* name, const ScalarFn& f, std::vector<Tensor> params) {
    const GradCheckReport r = grad_check(f, std::move(params));
    INFO(name);
    CHECK(r.max_rel_error < 1e-4);
  };
  // Random projection weights keep the scalar loss sensitive to every output.
  const Tensor proj34 = random_tensor({3, 4}, rng);
  auto project = [](Var y, const Tensor& w) {
    std::vector<double> ws(w.data().begin(), w.data().end());
    ws.resize(y.value().size(), 0.5);
    return weighted_sum(y, ws);
  };

  check("linear",
        [&](Tape&, const std::vector<Var>& p) { return project(linear(p[0], p[1], p[2]), proj34); },
        {random_tensor({3, 5}, rng), random_tensor({5, 4}, rng), random_tensor({4}, rng)});
  check("bmm",
        [&](Tape&, const std::vector<Var>& p) { return project(bmm(p[0], p[1]), proj34); },
        {random_tensor({2, 3, 4}, rng), random_tensor({2, 4, 2}, rng)});
  check("bmm_nt",
        [&](Tape&, const std::vector<Var>& p) { return project(bmm(p[0], p[1], true), proj34); },
        {random_tensor({2, 3, 4}, rng), random_tensor({2, 5, 4}, rng)});
  check("layernorm",
        [&](Tape&, const std::vector<Var>& p) { return project(layernorm(p[0], p[1], p[2]), proj34); },
        {random_tensor({3, 6}, rng), random_tensor({6}, rng), random_tensor({6}, rng)});
  check("gelu", [&](Tape&, const std::vector<Var>& p) { return project(gelu(p[0]), proj34); },
        {random_tensor({3, 4}, rng, 2.0)});
  check("softplus",
        [&](Tape&, const std::vector<Var>& p) { return project(softplus(p[0]), proj34); },
        {random_tensor({3, 4}, rng, 3.0)});
  check("softmax_rows",
        [&](Tape&, const std::vector<Var>& p) { return project(softmax_rows(p[0]), proj34); },
        {random_tensor({3, 4}, rng, 2.0)});
  check("log_softmax_rows",
        [&](Tape&, const std::vector<Var>& p) { return project(log_softmax_rows(p[0]), proj34); },
        {random_tensor({3, 4}, rng, 2.0)});
  check("split_merge_heads",
        [&](Tape&, const std::vector<Var>& p) {
          Var s = split_heads(p[0], 2, 3, 2);
          Var m = merge_heads(mul(s, s), 2, 3, 2);
          return project(m, proj34);
        },
        {random_tensor({6, 4}, rng)});
  RowMix mix;
  mix.add(0, 0.25);
  mix.add(2, 0.75);
  mix.end_row();
  mix.add(1, 1.0);
  mix.end_row();
  check("combine_rows",
        [&](Tape&, const std::vector<Var>& p) { return project(combine_rows(p[0], mix), proj34); },
        {random_tensor({3, 4}, rng)});
  check("concat_rows",
        [&](Tape&, const std::vector<Var>& p) {
          Var c = concat_rows({p[0], p[1]});
          return project(mul(c, c), proj34);
        },
        {random_tensor({1, 4}, rng), random_tensor({2, 4}, rng)});
  const std::vector<std::size_t> ids{1, 0, 3};
  check("pick", [&](Tape&, const std::vector<Var>& p) { return sum(mul(pick(p[0], ids), pick(p[0], ids))); },
        {random_tensor({3, 4}, rng)});
  check("cross_entropy",
        [&](Tape&, const std::vector<Var>& p) { return cross_entropy(p[0], ids); },
        {random_tensor({3, 4}, rng)});
  check("sub_mul_add_scalar",
        [&](Tape&, const std::vector<Var>& p) {
          return sum(add_scalar(mul(sub(p[0], p[1]), p[1]), 0.7));
        },
        {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
  check("add_bias_reshape",
        [&](Tape&, const std::vector<Var>& p) {
          Var y = reshape(add_bias(p[0], p[1]), {4, 3});
          return project(mul(y, y), proj34);
        },
        {random_tensor({3, 4}, rng), random_tensor({4}, rng)});
}

TEST_CASE("non-finite values fail fast naming the op") {
  Tape tape;
  Var x = tape.constant(Tensor::vector({1e300}));
  try {
    scale(x, 1e300);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("scale") != std::string::npos);
  }
  Tensor bad = Tensor::vector({std::nan("")});
  CHECK_THROWS_AS(tape.leaf(bad), NumericError);
}

TEST_CASE("backward visits each recorded node at most once") {
  data::Rng rng(1);
  Tape tape;
  Tensor xv = random_tensor({2, 3}, rng);
  xv.set_requires_grad(true);
  Var x = tape.leaf(xv);
  Var y = add(mul(x, x), x);
  Var z = sum(add(softmax_rows(y), y));
  tape.backward(z);
  CHECK(tape.backward_visits() <= tape.size());
  CHECK(tape.backward_visits() == 5);
}

TEST_CASE("ops are deterministic") {
  auto run = [] {
    data::Rng rng(9);
    Tape tape;
    Var a = tape.constant(random_tensor({7, 9}, rng));
    Var b = tape.constant(random_tensor({9, 5}, rng));
    return softmax_rows(matmul(a, b)).value();
  };
  CHECK(run() == run());
}

TEST_CASE("scalar and avx2 kernels agree") {
  using namespace kernels;
  if (!available(Backend::kAvx2)) {
    MESSAGE("avx2 unavailable; equivalence test skipped");
    return;
  }
  const KernelTable& s = scalar_table();
  const KernelTable& v = *avx2_table();
  data::Rng rng(77);
  auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::abs(a[i] - b[i]) > 1e-12 * (1.0 + std::abs(a[i]))) return false;
    }
    return true;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + rng.below(13), n = 1 + rng.below(19), k = 1 + rng.below(17);
    std::vector<double> a(m * k), b(k * n), c0(m * n), at(k * m), bt(n * k);
    for (auto* vec : {&a, &b, &c0, &at, &bt}) {
      for (double& x : *vec) x = rng.normal();
    }
    std::vector<double> cs = c0, cv = c0;
    s.gemm_nn(m, n, k, a.data(), b.data(), cs.data());
    v.gemm_nn(m, n, k, a.data(), b.data(), cv.data());
    CHECK(close(cs, cv));
    cs = c0;
    cv = c0;
    s.gemm_nt(m, n, k, a.data(), bt.data(), cs.data());
    v.gemm_nt(m, n, k, a.data(), bt.data(), cv.data());
    CHECK(close(cs, cv));
    cs = c0;
    cv = c0;
    s.gemm_tn(m, n, k, at.data(), b.data(), cs.data());
    v.gemm_tn(m, n, k, at.data(), b.data(), cv.data());
    CHECK(close(cs, cv));
    CHECK(s.dot(a.data(), at.data(), a.size()) ==
          doctest::Approx(v.dot(a.data(), at.data(), a.size())).epsilon(1e-12));
    std::vector<double> ys = b, yv = b;
    s.axpy(ys.size(), 0.3, bt.data(), ys.data());
    v.axpy(yv.size(), 0.3, bt.data(), yv.data());
    CHECK(close(ys, yv));
  }
}

TEST_CASE("ops give the same results under either kernel backend") {
  using namespace kernels;
  if (!available(Backend::kAvx2)) return;
  const Backend before = active().backend;
  auto run = [] {
    data::Rng rng(123);
    Tape tape;
    Tensor w = random_tensor({6, 8}, rng);
    w.set_requires_grad(true);
    Var x = tape.constant(random_tensor({10, 6}, rng));
    Var wv = tape.leaf(w);
    Var y = softmax_rows(matmul(x, wv));
    tape.backward(sum(mul(y, y)));
    return tape.grad(wv);
  };
  select(Backend::kScalar);
  const Tensor gs = run();
  select(Backend::kAvx2);
  const Tensor gv = run();
  select(before);
  for (std::size_t i = 0; i < gs.size(); ++i) CHECK(gs[i] == doctest::Approx(gv[i]).epsilon(1e-10));
}
