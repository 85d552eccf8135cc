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

namespace mergemix::tome {

/// Merge lineage: for every original token l, the index of the merged token
/// that currently holds it. Always surjective onto [0, group_count()).
class SourceMatrix {
 public:
  SourceMatrix() = default;
  /// Throws ShapeError unless every group in [0, groups) has a member.
  SourceMatrix(std::vector<std::size_t> group_of, std::size_t groups);

  static SourceMatrix identity(std::size_t n);

  std::size_t original_count() const { return group_of_.size(); }
  std::size_t group_count() const { return groups_; }
  std::size_t group_of(std::size_t l) const { return group_of_[l]; }
  const std::vector<std::size_t>& groups() const { return group_of_; }

  /// members()[k] lists the originals of group k in ascending order.
  std::vector<std::vector<std::size_t>> members() const;
  /// K x L0 0/1 matrix; every column sums to exactly 1.
  nx::Tensor dense() const;

  friend bool operator==(const SourceMatrix&, const SourceMatrix&) = default;

 private:
  std::vector<std::size_t> group_of_;
  std::size_t groups_ = 0;
};

/// group_of[l] = s2.group_of(s1.group_of(l)). s2 must be defined over s1's
/// groups.
SourceMatrix compose_source(const SourceMatrix& s1, const SourceMatrix& s2);

}  // namespace mergemix::tome
