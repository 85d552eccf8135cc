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

#include "mergemix/data/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "json.hpp"
#include "mergemix/data/rng.hpp"
#include "mergemix/error.hpp"
#include "mergemix/io/binary.hpp"

namespace mergemix::data {
namespace {

constexpr char kMagic[4] = {'M', 'M', 'X', '1'};
// Refuse headers describing more than 16 GiB of pixels.
constexpr std::uint64_t kMaxPixelBytes = std::uint64_t{1} << 34;

}  // namespace

void ImageDataset::validate() const {
  if (pixels.size() != size() * image_bytes()) {
    throw DomainError("dataset: " + std::to_string(pixels.size()) + " pixel bytes for " +
                      std::to_string(size()) + " images");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw DomainError("dataset: label " + std::to_string(labels[i]) + " at " + std::to_string(i) +
                        " outside " + std::to_string(num_classes) + " classes");
    }
  }
}

nx::Tensor ImageDataset::image(std::size_t i) const {
  if (i >= size()) throw DomainError("dataset: index " + std::to_string(i) + " out of range");
  nx::Tensor t({height, width, channels});
  const std::uint8_t* src = pixels.data() + i * image_bytes();
  for (std::size_t k = 0; k < image_bytes(); ++k) t[k] = src[k] / 255.0;
  return t;
}

nx::Tensor ImageDataset::batch(std::span<const std::size_t> indices) const {
  nx::Tensor t({indices.size(), height, width, channels});
  const std::size_t n = image_bytes();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= size()) throw DomainError("dataset: index " + std::to_string(indices[b]) + " out of range");
    const std::uint8_t* src = pixels.data() + indices[b] * n;
    double* dst = t.data().data() + b * n;
    for (std::size_t k = 0; k < n; ++k) dst[k] = src[k] / 255.0;
  }
  return t;
}

std::vector<std::size_t> ImageDataset::labels_of(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

ImageDataset ImageDataset::subset(std::span<const std::size_t> indices) const {
  ImageDataset out{height, width, channels, num_classes, {}, {}};
  const std::size_t n = image_bytes();
  for (std::size_t i : indices) {
    if (i >= size()) throw DomainError("dataset: index " + std::to_string(i) + " out of range");
    out.pixels.insert(out.pixels.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i * n),
                      pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<std::size_t> ImageDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::uint8_t l : labels) counts.at(l) += 1;
  return counts;
}

std::vector<std::uint8_t> encode_dataset(const ImageDataset& ds) {
  ds.validate();
  io::ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(ds.height);
  w.u32(ds.width);
  w.u32(ds.channels);
  w.u32(ds.num_classes);
  w.bytes(ds.pixels.data(), ds.pixels.size());
  w.bytes(ds.labels.data(), ds.labels.size());
  return w.buffer();
}

ImageDataset decode_dataset(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError(what + ": bad magic");
  io::ByteReader r(bytes, what);
  char magic[4];
  r.bytes(magic, 4);
  const std::uint64_t n = r.u32();
  ImageDataset ds;
  ds.height = r.u32();
  ds.width = r.u32();
  ds.channels = r.u32();
  ds.num_classes = r.u32();
  // Each dim is capped first so the product below cannot wrap.
  if (ds.height > 0xffff || ds.width > 0xffff || ds.channels > 0xffff) throw IoError(what + ": dim overflow");
  const std::uint64_t per_image = std::uint64_t{ds.height} * ds.width * ds.channels;
  if (ds.num_classes > 256 || per_image > kMaxPixelBytes || (per_image && n > kMaxPixelBytes / per_image)) {
    throw IoError(what + ": dim overflow");
  }
  const std::uint64_t total = n * per_image + n;
  if (r.remaining() < total) throw IoError(what + ": truncated payload");
  if (r.remaining() > total) throw IoError(what + ": trailing bytes");
  ds.pixels.resize(n * per_image);
  ds.labels.resize(n);
  r.bytes(ds.pixels.data(), ds.pixels.size());
  r.bytes(ds.labels.data(), ds.labels.size());
  ds.validate();
  return ds;
}

void save_dataset(const ImageDataset& ds, const std::filesystem::path& path) {
  io::write_file(path.string(), encode_dataset(ds));
}

ImageDataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(io::read_file(path.string()), path.string());
}

ImageDataset load_cifar_binary(const std::filesystem::path& path, std::uint32_t num_classes) {
  constexpr std::size_t kSide = 32, kPlane = kSide * kSide, kRecord = 1 + 3 * kPlane;
  const auto bytes = io::read_file(path.string());
  if (bytes.size() % kRecord != 0) throw IoError(path.string() + ": truncated payload");
  ImageDataset ds{kSide, kSide, 3, num_classes, {}, {}};
  const std::size_t n = bytes.size() / kRecord;
  ds.pixels.resize(n * 3 * kPlane);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kRecord;
    ds.labels.push_back(rec[0]);
    for (std::size_t k = 0; k < kPlane; ++k) {
      for (std::size_t c = 0; c < 3; ++c) ds.pixels[(i * kPlane + k) * 3 + c] = rec[1 + c * kPlane + k];
    }
  }
  ds.validate();
  return ds;
}

namespace vocab {

std::string token_name(std::size_t id) {
  static const std::array<const char*, kSize> names = {
      "<pad>", "<bos>", "<eos>",  "describe", "the",     "shape",   "color",
      "square", "ring", "cross", "triangle", "diamond", "circle",
      "red",   "green", "blue",   "yellow",   "magenta", "cyan"};
  return id < names.size() ? names[id] : "<unk>";
}

std::vector<std::size_t> prompt() { return {kPromptBegin, kPromptBegin + 1, kPromptBegin + 2, kPromptBegin + 3}; }

}  // namespace vocab

CaptionDataset CaptionDataset::subset(std::span<const std::size_t> indices) const {
  CaptionDataset out{images.subset(indices), prompt, {}};
  for (std::size_t i : indices) out.targets.push_back(targets.at(i));
  return out;
}

std::filesystem::path captions_path(const std::filesystem::path& dataset) {
  return dataset.string() + ".captions.json";
}

void save_captions(const CaptionDataset& ds, const std::filesystem::path& dataset) {
  nlohmann::ordered_json j;
  j["format"] = "mergemix-captions/1";
  j["prompt"] = ds.prompt;
  j["targets"] = ds.targets;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < vocab::kSize; ++i) names.push_back(vocab::token_name(i));
  j["vocab"] = names;
  io::write_text(captions_path(dataset).string(), j.dump() + "\n");
}

CaptionDataset load_captions(const std::filesystem::path& dataset) {
  const auto side = captions_path(dataset);
  if (!std::filesystem::exists(side)) throw IoError(dataset.string() + ": captions required");
  CaptionDataset ds;
  ds.images = load_dataset(dataset);
  try {
    const auto j = nlohmann::json::parse(io::read_text(side.string()));
    ds.prompt = j.at("prompt").get<std::vector<std::size_t>>();
    ds.targets = j.at("targets").get<std::vector<std::vector<std::size_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(side.string() + ": " + e.what());
  }
  if (ds.targets.size() != ds.images.size()) {
    throw IoError(side.string() + ": " + std::to_string(ds.targets.size()) + " captions for " +
                  std::to_string(ds.images.size()) + " images");
  }
  return ds;
}

void ShapesConfig::validate() const {
  if (classes < 2) throw ConfigError("data.classes: must be >= 2");
  if (classes > 36) throw ConfigError("data.classes: at most 36 (shape, color) pairs");
  if (image_size < 8) throw ConfigError("data.image_size: must be >= 8");
  if (noise < 0 || texture < 0 || color_jitter < 0) throw ConfigError("data: amplitudes must be >= 0");
}

std::size_t palette_colors(std::size_t classes) {
  const auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(classes))));
  return std::min<std::size_t>(6, std::max<std::size_t>(2, root));
}

namespace {

constexpr std::array<std::array<double, 3>, 6> kPalette = {{
    {0.90, 0.15, 0.15},  // red
    {0.15, 0.80, 0.20},  // green
    {0.20, 0.30, 0.95},  // blue
    {0.95, 0.85, 0.15},  // yellow
    {0.85, 0.20, 0.85},  // magenta
    {0.15, 0.85, 0.90},  // cyan
}};

// Shape membership for a point (u, v) in units of the shape radius. Order
// matches the vocabulary; the first two differ in structure (filled vs
// hollow), not just in outline.
enum Shape : std::size_t { kSquare, kRing, kCross, kTriangle, kDiamond, kCircle };

bool inside(std::size_t shape, double u, double v) {
  const double r2 = u * u + v * v;
  switch (shape) {
    case kSquare: return std::abs(u) <= 0.8 && std::abs(v) <= 0.8;
    case kRing: return r2 <= 1.0 && r2 >= 0.3;
    case kCross: return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) || (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
    case kTriangle: return v <= 0.8 && v >= -1.0 + 1.9 * std::abs(u);
    case kDiamond: return std::abs(u) + std::abs(v) <= 1.0;
    default: return r2 <= 1.0;
  }
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

ImageDataset generate_shapes(const ShapesConfig& cfg) {
  cfg.validate();
  const std::size_t S = cfg.image_size, colors = palette_colors(cfg.classes);
  ImageDataset ds{static_cast<std::uint32_t>(S), static_cast<std::uint32_t>(S), 3,
                  static_cast<std::uint32_t>(cfg.classes), {}, {}};
  ds.pixels.resize(cfg.count * S * S * 3);
  Rng rng(cfg.seed);
  std::vector<double> img(S * S * 3);
  for (std::size_t n = 0; n < cfg.count; ++n) {
    const std::size_t label = n % cfg.classes;
    ds.labels.push_back(static_cast<std::uint8_t>(label));
    const std::size_t shape = label / colors, color = label % colors;

    // Background: gray level with oriented stripes.
    const double base = 0.25 + 0.25 * rng.uniform();
    const double angle = std::numbers::pi * rng.uniform();
    const double freq = 2.0 * std::numbers::pi * (1.5 + 2.5 * rng.uniform()) / static_cast<double>(S);
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double tint[3] = {0.05 * rng.normal(), 0.05 * rng.normal(), 0.05 * rng.normal()};
    for (std::size_t y = 0; y < S; ++y) {
      for (std::size_t x = 0; x < S; ++x) {
        const double t = cfg.texture *
                         std::sin(freq * (std::cos(angle) * x + std::sin(angle) * y) + phase);
        for (std::size_t c = 0; c < 3; ++c) img[(y * S + x) * 3 + c] = base + t + tint[c];
      }
    }

    auto paint = [&](std::size_t which, const std::array<double, 3>& rgb, double radius) {
      const double cx = (0.3 + 0.4 * rng.uniform()) * S, cy = (0.3 + 0.4 * rng.uniform()) * S;
      double col[3];
      for (std::size_t c = 0; c < 3; ++c) col[c] = rgb[c] + cfg.color_jitter * (2 * rng.uniform() - 1);
      for (std::size_t y = 0; y < S; ++y) {
        for (std::size_t x = 0; x < S; ++x) {
          const double u = (x + 0.5 - cx) / radius, v = (y + 0.5 - cy) / radius;
          if (inside(which, u, v)) {
            for (std::size_t c = 0; c < 3; ++c) img[(y * S + x) * 3 + c] = col[c];
          }
        }
      }
    };
    for (std::size_t d = 0; d < cfg.distractors; ++d) {
      paint(kCircle, kPalette[rng.below(kPalette.size())], (0.06 + 0.04 * rng.uniform()) * S);
    }
    paint(shape, kPalette[color], (0.22 + 0.12 * rng.uniform()) * S);

    std::uint8_t* out = ds.pixels.data() + n * S * S * 3;
    for (std::size_t k = 0; k < img.size(); ++k) out[k] = to_u8(img[k] + cfg.noise * (2 * rng.uniform() - 1));
  }
  return ds;
}

CaptionDataset generate_captions(const ShapesConfig& cfg) {
  CaptionDataset out;
  out.images = generate_shapes(cfg);
  out.prompt = vocab::prompt();
  const std::size_t colors = palette_colors(cfg.classes);
  for (std::uint8_t label : out.images.labels) {
    out.targets.push_back({vocab::kShapeBegin + label / colors, vocab::kColorBegin + label % colors, vocab::kEos});
  }
  return out;
}

void save_manifest(const ImageDataset& ds, const ShapesConfig& cfg, const std::filesystem::path& dataset) {
  nlohmann::ordered_json j;
  j["format"] = "MMX1";
  j["seed"] = cfg.seed;
  j["classes"] = cfg.classes;
  j["counts"] = ds.class_counts();
  j["images"] = ds.size();
  j["image_size"] = cfg.image_size;
  j["generator"] = {{"noise", cfg.noise}, {"texture", cfg.texture}, {"color_jitter", cfg.color_jitter},
                    {"distractors", cfg.distractors}, {"rng", std::string(Rng::kAlgorithm)}};
  io::write_text(dataset.string() + ".manifest.json", j.dump(2) + "\n");
}

}  // namespace mergemix::data
