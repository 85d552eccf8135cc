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

#include "mergemix/recovery/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mergemix/error.hpp"

namespace mergemix::recovery {

RecoveredAttention recover_attention(const nx::Tensor& a_k, const tome::SourceMatrix& source,
                                     RecoveryMode mode) {
  if (a_k.size() != source.group_count()) {
    throw ShapeError("recover_attention: " + std::to_string(a_k.size()) + " scores for " +
                     std::to_string(source.group_count()) + " groups");
  }
  std::vector<double> group_size(source.group_count(), 0.0);
  for (std::size_t g : source.groups()) group_size.at(g) += 1.0;

  RecoveredAttention out;
  out.values.resize(source.original_count());
  for (std::size_t l = 0; l < source.original_count(); ++l) {
    const std::size_t g = source.group_of(l);
    const double v = a_k[g];
    if (!std::isfinite(v) || v < 0.0) {
      throw DomainError("recover_attention: score " + std::to_string(v) + " at group " +
                        std::to_string(g));
    }
    out.values[l] = mode == RecoveryMode::kBroadcast ? v : v / group_size[g];
  }
  return out;
}

double PatchMask::soft_sum() const { return std::accumulate(soft.begin(), soft.end(), 0.0); }

PatchMask build_mask(const RecoveredAttention& attn, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw DomainError("build_mask: lambda " + std::to_string(lambda) + " outside [0, 1]");
  }
  const std::size_t n = attn.size();
  PatchMask mask;
  mask.bits.assign(n, 0);
  mask.p = static_cast<std::size_t>(std::floor(lambda * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return attn.values[a] > attn.values[b];
  });
  const double peak = n ? *std::max_element(attn.values.begin(), attn.values.end()) : 0.0;
  mask.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mask.p));
  for (std::size_t i : mask.selected) {
    mask.bits[i] = 1;
    mask.soft.push_back(peak > 0.0 ? attn.values[i] / peak : 0.0);
  }
  return mask;
}

std::size_t PixelMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

PixelMask mask_to_pixels(const PatchMask& mask, std::size_t grid_h, std::size_t grid_w,
                         std::size_t height, std::size_t width) {
  if (grid_h * grid_w != mask.size()) {
    throw ShapeError("mask_to_pixels: grid " + std::to_string(grid_h) + "x" +
                     std::to_string(grid_w) + " for " + std::to_string(mask.size()) + " patches");
  }
  if (grid_h == 0 || height % grid_h != 0 || width % grid_w != 0 ||
      height / grid_h != width / grid_w) {
    throw ShapeError("mask_to_pixels: image " + std::to_string(height) + "x" +
                     std::to_string(width) + " does not tile into square patches");
  }
  const std::size_t patch = height / grid_h;
  PixelMask out{height, width, std::vector<std::uint8_t>(height * width, 0)};
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      out.bits[y * width + x] = mask.bits[(y / patch) * grid_w + x / patch];
    }
  }
  return out;
}

}  // namespace mergemix::recovery
