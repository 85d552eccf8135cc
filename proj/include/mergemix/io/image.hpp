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
#include <string>
#include <vector>

#include "mergemix/numerics/tensor.hpp"

namespace mergemix::io {

/// 8-bit raster with 1 (PGM) or 3 (PPM) interleaved channels.
struct Raster {
  std::size_t width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// H x W x C tensor in [0, 1] (values are clamped) to a raster.
Raster to_raster(const nx::Tensor& image);
/// Nearest-neighbour upscale by an integer factor, for viewing tiny images.
Raster upscale(const Raster& r, std::size_t factor);

/// Binary P5 / P6 depending on channel count.
void write_pnm(const std::string& path, const Raster& r);
Raster read_pnm(const std::string& path);

}  // namespace mergemix::io
