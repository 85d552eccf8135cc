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
#include <cstdint>
#include <vector>

#include "mergemix/numerics/tensor.hpp"
#include "mergemix/tome/source.hpp"

namespace mergemix::recovery {

enum class RecoveryMode {
  kBroadcast,       // every member gets the group score
  kSizeNormalized,  // group score divided by group size
};

/// Saliency per original patch, length L0, finite and >= 0.
struct RecoveredAttention {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

RecoveredAttention recover_attention(const nx::Tensor& a_k, const tome::SourceMatrix& source,
                                     RecoveryMode mode = RecoveryMode::kBroadcast);

struct PatchMask {
  std::vector<std::uint8_t> bits;    // length L0
  std::size_t p = 0;                 // number of set bits
  std::vector<std::size_t> selected; // set positions, in rank order
  /// Recovered values at the selected positions divided by max(values),
  /// so each lies in (0, 1] unless the map is all zero.
  std::vector<double> soft;

  std::size_t size() const { return bits.size(); }
  double soft_sum() const;
};

/// p = floor(lambda * L0). Ranks by value descending, ties to the lower
/// index, so masks are nested in lambda.
PatchMask build_mask(const RecoveredAttention& attn, double lambda);

/// Row-major H x W 0/1 mask with every patch bit tiled over its block.
struct PixelMask {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> bits;

  std::size_t count() const;
};

PixelMask mask_to_pixels(const PatchMask& mask, std::size_t grid_h, std::size_t grid_w,
                         std::size_t height, std::size_t width);

}  // namespace mergemix::recovery
