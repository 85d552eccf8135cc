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
#include <span>
#include <vector>

#include "mergemix/numerics/ops.hpp"
#include "mergemix/numerics/tensor.hpp"
#include "mergemix/tome/source.hpp"

namespace mergemix::tome {

struct MergeEdge {
  std::size_t src;  // A-side token, absorbed
  std::size_t dst;  // B-side token, survives
  double similarity;

  friend bool operator==(const MergeEdge&, const MergeEdge&) = default;
};

/// Result of one bipartite soft matching round over L input tokens.
struct MergePlan {
  std::size_t input_count = 0;
  /// Ranked by (similarity desc, src asc, dst asc).
  std::vector<MergeEdge> edges;
  /// Surviving input indices in ascending position; this is the output order.
  std::vector<std::size_t> kept;
  /// For every input index, the output index that absorbs it.
  std::vector<std::size_t> output_of;

  std::size_t output_count() const { return kept.size(); }
  bool empty() const { return edges.empty(); }
  /// Lineage of this single round (input index -> output index).
  SourceMatrix source() const;

  friend bool operator==(const MergePlan&, const MergePlan&) = default;
};

MergePlan identity_plan(std::size_t n);

/// ToMe matching over the rows of `metric` (L x D). Tokens at positions
/// >= `protected_prefix` alternate A (even offset) / B (odd offset); the
/// prefix (e.g. a class token) never merges. Each A token proposes its most
/// cosine-similar B token (ties to the lower B index) and the r strongest
/// proposals become edges (ties to the lower A index).
///
/// Throws DomainError unless r <= floor((L - protected_prefix) / 2).
MergePlan bipartite_soft_matching(const nx::Tensor& metric, std::size_t r,
                                  std::size_t protected_prefix = 0);

/// Appends one output row per surviving token to `mix`: the size-weighted
/// mean of its members, with input rows offset by `row_offset`.
void append_merge_rows(const MergePlan& plan, std::span<const double> sizes,
                       std::size_t row_offset, nx::RowMix& mix);

/// Size-weighted mean of per-token scalars over each merged group.
std::vector<double> merge_scores(const MergePlan& plan, std::span<const double> sizes,
                                 std::span<const double> scores);

/// Sizes after the merge (members add).
std::vector<double> merge_sizes(const MergePlan& plan, std::span<const double> sizes);

}  // namespace mergemix::tome
