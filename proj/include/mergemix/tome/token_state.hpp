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
#include <vector>

#include "mergemix/numerics/tensor.hpp"
#include "mergemix/tome/bsm.hpp"
#include "mergemix/tome/source.hpp"

namespace mergemix::tome {

/// Token embeddings with merge bookkeeping. sizes[k] counts the original
/// tokens folded into row k; they always sum to source.original_count().
struct TokenState {
  nx::Tensor tokens;  // L x D
  std::vector<double> sizes;
  SourceMatrix source;

  static TokenState fresh(nx::Tensor tokens);

  std::size_t count() const { return sizes.size(); }
  /// Throws ShapeError when the invariants above do not hold.
  void validate() const;
};

/// Size-weighted merge of the plan's groups. Identical members merge to
/// exactly their shared value.
TokenState apply_merge(const TokenState& state, const MergePlan& plan);

/// Removal counts per layer.
struct MergeSchedule {
  std::vector<std::size_t> r_per_layer;

  static MergeSchedule none(std::size_t layers) { return {std::vector<std::size_t>(layers, 0)}; }
  static MergeSchedule constant(std::size_t layers, std::size_t r) {
    return {std::vector<std::size_t>(layers, r)};
  }

  std::size_t layers() const { return r_per_layer.size(); }
  std::size_t total() const;
  /// counts[0] = initial count, counts[i + 1] = count after layer i.
  /// Throws DomainError if any layer would violate r <= floor(mergeable / 2).
  std::vector<std::size_t> token_counts(std::size_t initial, std::size_t protected_prefix = 0) const;
};

}  // namespace mergemix::tome
