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

#include <vector>

#include "doctest.h"
#include "mergemix/data/rng.hpp"
#include "mergemix/error.hpp"
#include "mergemix/recovery/recovery.hpp"
#include "mergemix/tome/token_state.hpp"
#include "oracles.hpp"

using namespace mergemix;
using namespace mergemix::recovery;
using nx::Tensor;
using tome::SourceMatrix;

TEST_CASE("recover_attention broadcasts group scores") {
  const RecoveredAttention r =
      recover_attention(Tensor::vector({0.7, 0.3}), SourceMatrix({0, 0, 1, 1}, 2));
  CHECK(r.values == std::vector<double>{0.7, 0.7, 0.3, 0.3});
  const Tensor a = Tensor::vector({0.1, 0.2, 0.3});
  CHECK(recover_attention(a, SourceMatrix::identity(3)).values == std::vector<double>{0.1, 0.2, 0.3});
  CHECK_THROWS_AS(recover_attention(a, SourceMatrix::identity(4)), ShapeError);
}

TEST_CASE("size-normalized recovery divides by group size") {
  const RecoveredAttention r = recover_attention(Tensor::vector({0.6, 0.3}),
                                                 SourceMatrix({0, 0, 0, 1}, 2),
                                                 RecoveryMode::kSizeNormalized);
  const double third = 0.6 / 3.0;
  CHECK(r.values == std::vector<double>{third, third, third, 0.3});
}

TEST_CASE("recovery on composed sources matches tracked membership") {
  data::Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor tokens({8, 2});
    for (double& v : tokens.data()) v = rng.normal();
    tome::TokenState s = tome::TokenState::fresh(tokens);
    std::vector<std::vector<std::size_t>> rounds;
    for (int layer = 0; layer < 3; ++layer) {
      const auto plan = tome::bipartite_soft_matching(s.tokens, rng.below(s.count() / 2 + 1));
      rounds.push_back(plan.output_of);
      s = tome::apply_merge(s, plan);
    }
    Tensor a_k({s.count()});
    for (double& v : a_k.data()) v = rng.uniform();
    const RecoveredAttention r = recover_attention(a_k, s.source);
    const auto groups = oracle::membership(8, rounds);
    for (std::size_t k = 0; k < groups.size(); ++k) {
      for (std::size_t l : groups[k]) CHECK(r.values[l] == a_k[k]);
    }
  }
}

TEST_CASE("build_mask examples") {
  const RecoveredAttention attn{{0.9, 0.1, 0.5, 0.3}};
  const PatchMask m = build_mask(attn, 0.5);
  CHECK(m.p == 2);
  CHECK(m.bits == std::vector<std::uint8_t>{1, 0, 1, 0});
  CHECK(m.soft.size() == 2);
  CHECK(m.soft[0] == 1.0);
  CHECK(m.soft[1] == doctest::Approx(0.5 / 0.9).epsilon(1e-15));
  CHECK(build_mask(attn, 1.0).bits == std::vector<std::uint8_t>{1, 1, 1, 1});
  CHECK(build_mask(attn, 0.0).bits == std::vector<std::uint8_t>{0, 0, 0, 0});
  CHECK_THROWS_AS(build_mask(attn, 1.5), DomainError);
}

TEST_CASE("half of 576 tokens selects 288") {
  RecoveredAttention attn{std::vector<double>(576, 1.0)};
  const PatchMask m = build_mask(attn, 0.5);
  CHECK(m.p == 288);
  // Uniform scores: ties resolve to the first p indices.
  for (std::size_t i = 0; i < 576; ++i) CHECK(m.bits[i] == (i < 288 ? 1 : 0));
}

TEST_CASE("masks are nested in lambda and sized by floor") {
  data::Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    RecoveredAttention attn;
    // Coarse values force many ties.
    for (std::size_t i = 0; i < n; ++i) attn.values.push_back(static_cast<double>(rng.below(4)));
    double l1 = rng.uniform(), l2 = rng.uniform();
    if (l1 > l2) std::swap(l1, l2);
    const PatchMask a = build_mask(attn, l1), b = build_mask(attn, l2);
    CHECK(a.p == static_cast<std::size_t>(std::floor(l1 * n)));
    for (std::size_t i = 0; i < n; ++i) CHECK(a.bits[i] <= b.bits[i]);
  }
}

TEST_CASE("mask_to_pixels tiles patch bits") {
  PatchMask m = build_mask(RecoveredAttention{{1.0, 0.0, 0.0, 1.0}}, 0.5);
  const PixelMask px = mask_to_pixels(m, 2, 2, 4, 4);
  const std::vector<std::uint8_t> expect{1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1};
  CHECK(px.bits == expect);
  CHECK(px.count() == m.p * 4);
  const PixelMask full = mask_to_pixels(build_mask(RecoveredAttention{{1, 2, 3, 4}}, 1.0), 2, 2, 6, 6);
  CHECK(full.count() == 36);
  CHECK_THROWS_AS(mask_to_pixels(m, 2, 2, 5, 4), ShapeError);
  CHECK_THROWS_AS(mask_to_pixels(m, 1, 3, 3, 9), ShapeError);
}
