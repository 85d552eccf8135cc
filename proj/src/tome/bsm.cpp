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

#include "mergemix/tome/bsm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mergemix/error.hpp"
#include "mergemix/numerics/kernels.hpp"

namespace mergemix::tome {

SourceMatrix MergePlan::source() const { return SourceMatrix(output_of, kept.size()); }

MergePlan identity_plan(std::size_t n) {
  MergePlan plan;
  plan.input_count = n;
  plan.kept.resize(n);
  std::iota(plan.kept.begin(), plan.kept.end(), std::size_t{0});
  plan.output_of = plan.kept;
  return plan;
}

MergePlan bipartite_soft_matching(const nx::Tensor& metric, std::size_t r,
                                  std::size_t protected_prefix) {
  const std::size_t len = metric.rank() == 0 ? 0 : metric.dim(0);
  const std::size_t width = metric.cols();
  if (protected_prefix > len) throw DomainError("bipartite_soft_matching: prefix exceeds length");
  const std::size_t mergeable = len - protected_prefix;
  if (r > mergeable / 2) {
    throw DomainError("bipartite_soft_matching: r=" + std::to_string(r) +
                      " out of range for " + std::to_string(mergeable) +
                      " mergeable tokens (max " + std::to_string(mergeable / 2) + ")");
  }
  if (r == 0) return identity_plan(len);

  // dot / (|a| |b|) rather than pre-normalized rows: collinear rows then
  // score exactly +-1, so exact ties stay ties.
  const auto& kern = nx::kernels::active();
  const double* rows = metric.data().data();
  std::vector<double> norm(len);
  for (std::size_t i = 0; i < len; ++i) {
    norm[i] = std::sqrt(kern.dot(rows + i * width, rows + i * width, width));
  }
  auto cosine = [&](std::size_t a, std::size_t b) {
    if (norm[a] <= 1e-12 || norm[b] <= 1e-12) return 0.0;
    return kern.dot(rows + a * width, rows + b * width, width) / (norm[a] * norm[b]);
  };

  std::vector<std::size_t> side_a, side_b;
  for (std::size_t i = protected_prefix; i < len; ++i) {
    ((i - protected_prefix) % 2 == 0 ? side_a : side_b).push_back(i);
  }

  std::vector<MergeEdge> proposals;
  proposals.reserve(side_a.size());
  for (std::size_t a : side_a) {
    MergeEdge best{a, side_b.front(), -2.0};
    for (std::size_t b : side_b) {
      const double s = cosine(a, b);
      if (s > best.similarity) best = {a, b, s};
    }
    proposals.push_back(best);
  }
  std::stable_sort(proposals.begin(), proposals.end(), [](const MergeEdge& x, const MergeEdge& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    if (x.src != y.src) return x.src < y.src;
    return x.dst < y.dst;
  });
  proposals.resize(r);

  MergePlan plan;
  plan.input_count = len;
  plan.edges = std::move(proposals);
  std::vector<bool> absorbed(len, false);
  for (const MergeEdge& e : plan.edges) absorbed[e.src] = true;
  plan.output_of.assign(len, 0);
  for (std::size_t i = 0; i < len; ++i) {
    if (!absorbed[i]) {
      plan.output_of[i] = plan.kept.size();
      plan.kept.push_back(i);
    }
  }
  for (const MergeEdge& e : plan.edges) plan.output_of[e.src] = plan.output_of[e.dst];
  return plan;
}

namespace {

std::vector<std::vector<std::size_t>> group_members(const MergePlan& plan) {
  std::vector<std::vector<std::size_t>> members(plan.output_count());
  for (std::size_t i = 0; i < plan.input_count; ++i) members[plan.output_of[i]].push_back(i);
  return members;
}

void check_sizes(const MergePlan& plan, std::span<const double> sizes) {
  if (sizes.size() != plan.input_count) {
    throw ShapeError("merge: " + std::to_string(sizes.size()) + " sizes for " +
                     std::to_string(plan.input_count) + " tokens");
  }
}

}  // namespace

void append_merge_rows(const MergePlan& plan, std::span<const double> sizes,
                       std::size_t row_offset, nx::RowMix& mix) {
  check_sizes(plan, sizes);
  for (const auto& group : group_members(plan)) {
    double total = 0.0;
    for (std::size_t i : group) total += sizes[i];
    for (std::size_t i : group) mix.add(row_offset + i, sizes[i] / total);
    mix.end_row();
  }
}

std::vector<double> merge_scores(const MergePlan& plan, std::span<const double> sizes,
                                 std::span<const double> scores) {
  check_sizes(plan, sizes);
  if (scores.size() != plan.input_count) throw ShapeError("merge_scores: length mismatch");
  std::vector<double> out;
  out.reserve(plan.output_count());
  for (const auto& group : group_members(plan)) {
    double total = 0.0, acc = 0.0;
    for (std::size_t i : group) {
      total += sizes[i];
      acc += sizes[i] * scores[i];
    }
    out.push_back(acc / total);
  }
  return out;
}

std::vector<double> merge_sizes(const MergePlan& plan, std::span<const double> sizes) {
  check_sizes(plan, sizes);
  std::vector<double> out(plan.output_count(), 0.0);
  for (std::size_t i = 0; i < plan.input_count; ++i) out[plan.output_of[i]] += sizes[i];
  return out;
}

}  // namespace mergemix::tome
