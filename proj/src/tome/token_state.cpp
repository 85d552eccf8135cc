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

#include "mergemix/tome/token_state.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "mergemix/error.hpp"

namespace mergemix::tome {

TokenState TokenState::fresh(nx::Tensor tokens) {
  const std::size_t n = tokens.rank() == 0 ? 0 : tokens.dim(0);
  TokenState s{std::move(tokens), std::vector<double>(n, 1.0), SourceMatrix::identity(n)};
  return s;
}

void TokenState::validate() const {
  if (tokens.rank() != 2 || tokens.dim(0) != sizes.size()) {
    throw ShapeError("token state: " + std::to_string(sizes.size()) + " sizes for tokens " +
                     nx::shape_string(tokens.shape()));
  }
  if (source.group_count() != sizes.size()) {
    throw ShapeError("token state: source has " + std::to_string(source.group_count()) +
                     " groups for " + std::to_string(sizes.size()) + " tokens");
  }
  const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
  if (total != static_cast<double>(source.original_count())) {
    throw ShapeError("token state: sizes sum to " + std::to_string(total) + ", expected " +
                     std::to_string(source.original_count()));
  }
}

TokenState apply_merge(const TokenState& state, const MergePlan& plan) {
  if (plan.input_count != state.count()) {
    throw ShapeError("apply_merge: plan covers " + std::to_string(plan.input_count) +
                     " tokens, state has " + std::to_string(state.count()));
  }
  if (plan.empty()) return state;
  const std::size_t width = state.tokens.cols();
  std::vector<std::vector<std::size_t>> members(plan.output_count());
  for (std::size_t i = 0; i < plan.input_count; ++i) members[plan.output_of[i]].push_back(i);

  TokenState out;
  out.tokens = nx::Tensor({plan.output_count(), width});
  out.sizes = merge_sizes(plan, state.sizes);
  for (std::size_t o = 0; o < members.size(); ++o) {
    // Anchored form x0 + sum w_i (x_i - x0): exact when members coincide.
    const std::size_t anchor = members[o].front();
    const double total = out.sizes[o];
    for (std::size_t c = 0; c < width; ++c) {
      const double x0 = state.tokens.at(anchor, c);
      double acc = 0.0;
      for (std::size_t i : members[o]) acc += state.sizes[i] / total * (state.tokens.at(i, c) - x0);
      out.tokens.at(o, c) = x0 + acc;
    }
  }
  out.source = compose_source(state.source, plan.source());
  return out;
}

std::size_t MergeSchedule::total() const {
  return std::accumulate(r_per_layer.begin(), r_per_layer.end(), std::size_t{0});
}

std::vector<std::size_t> MergeSchedule::token_counts(std::size_t initial,
                                                     std::size_t protected_prefix) const {
  std::vector<std::size_t> counts{initial};
  for (std::size_t i = 0; i < r_per_layer.size(); ++i) {
    const std::size_t n = counts.back();
    const std::size_t mergeable = n >= protected_prefix ? n - protected_prefix : 0;
    if (r_per_layer[i] > mergeable / 2) {
      throw DomainError("merge schedule: layer " + std::to_string(i) + " removes " +
                        std::to_string(r_per_layer[i]) + " of " + std::to_string(n) +
                        " tokens (max " + std::to_string(mergeable / 2) + ")");
    }
    counts.push_back(n - r_per_layer[i]);
  }
  return counts;
}

}  // namespace mergemix::tome
