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

#include "mergemix/tome/source.hpp"

#include <numeric>
#include <string>

#include "mergemix/error.hpp"

namespace mergemix::tome {

SourceMatrix::SourceMatrix(std::vector<std::size_t> group_of, std::size_t groups)
    : group_of_(std::move(group_of)), groups_(groups) {
  std::vector<bool> seen(groups_, false);
  for (std::size_t g : group_of_) {
    if (g >= groups_) {
      throw ShapeError("source matrix: group " + std::to_string(g) + " out of range " +
                       std::to_string(groups_));
    }
    seen[g] = true;
  }
  for (std::size_t k = 0; k < groups_; ++k) {
    if (!seen[k]) throw ShapeError("source matrix: group " + std::to_string(k) + " is empty");
  }
}

SourceMatrix SourceMatrix::identity(std::size_t n) {
  std::vector<std::size_t> g(n);
  std::iota(g.begin(), g.end(), std::size_t{0});
  return SourceMatrix(std::move(g), n);
}

std::vector<std::vector<std::size_t>> SourceMatrix::members() const {
  std::vector<std::vector<std::size_t>> out(groups_);
  for (std::size_t l = 0; l < group_of_.size(); ++l) out[group_of_[l]].push_back(l);
  return out;
}

nx::Tensor SourceMatrix::dense() const {
  nx::Tensor m({groups_, group_of_.size()});
  for (std::size_t l = 0; l < group_of_.size(); ++l) m.at(group_of_[l], l) = 1.0;
  return m;
}

SourceMatrix compose_source(const SourceMatrix& s1, const SourceMatrix& s2) {
  if (s2.original_count() != s1.group_count()) {
    throw ShapeError("compose_source: inner source covers " +
                     std::to_string(s2.original_count()) + " tokens but outer has " +
                     std::to_string(s1.group_count()) + " groups");
  }
  std::vector<std::size_t> g(s1.original_count());
  for (std::size_t l = 0; l < g.size(); ++l) g[l] = s2.group_of(s1.group_of(l));
  return SourceMatrix(std::move(g), s2.group_count());
}

}  // namespace mergemix::tome
