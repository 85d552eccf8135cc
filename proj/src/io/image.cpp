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

#include "mergemix/io/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mergemix/error.hpp"
#include "mergemix/io/binary.hpp"

namespace mergemix::io {

Raster to_raster(const nx::Tensor& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw ShapeError("image: expected H x W x {1,3}");
  }
  Raster r{image.dim(1), image.dim(0), image.dim(2), std::vector<std::uint8_t>(image.size())};
  for (std::size_t i = 0; i < image.size(); ++i) {
    r.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
  }
  return r;
}

Raster upscale(const Raster& r, std::size_t factor) {
  if (factor == 0) throw DomainError("upscale: factor must be >= 1");
  Raster out{r.width * factor, r.height * factor, r.channels, {}};
  out.pixels.resize(out.width * out.height * out.channels);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const std::uint8_t* src = &r.pixels[((y / factor) * r.width + x / factor) * r.channels];
      std::copy(src, src + r.channels, &out.pixels[(y * out.width + x) * out.channels]);
    }
  }
  return out;
}

void write_pnm(const std::string& path, const Raster& r) {
  if (r.channels != 1 && r.channels != 3) throw DomainError("pnm: channels must be 1 or 3");
  if (r.pixels.size() != r.width * r.height * r.channels) throw ShapeError("pnm: pixel count mismatch");
  const std::string header = std::string(r.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(r.width) + " " +
                             std::to_string(r.height) + "\n255\n";
  std::vector<std::uint8_t> buf(header.begin(), header.end());
  buf.insert(buf.end(), r.pixels.begin(), r.pixels.end());
  write_file(path, buf);
}

Raster read_pnm(const std::string& path) {
  const auto buf = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(buf[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < buf.size() && !std::isspace(buf[pos])) t.push_back(static_cast<char>(buf[pos++]));
    return t;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") throw IoError(path + ": bad magic");
  Raster r;
  r.channels = magic == "P5" ? 1 : 3;
  try {
    r.width = std::stoul(token());
    r.height = std::stoul(token());
    if (std::stoul(token()) != 255) throw IoError(path + ": only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw IoError(path + ": malformed header");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t n = r.width * r.height * r.channels;
  if (buf.size() < pos + n) throw IoError(path + ": truncated payload");
  r.pixels.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos), buf.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return r;
}

}  // namespace mergemix::io
