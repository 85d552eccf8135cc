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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mergemix/numerics/tensor.hpp"

namespace mergemix::data {

/// N x H x W x C u8 images with one class id per image.
struct ImageDataset {
  std::uint32_t height = 0, width = 0, channels = 0, num_classes = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_bytes() const { return std::size_t{height} * width * channels; }
  /// Throws DomainError on a label >= num_classes or a pixel/label count mismatch.
  void validate() const;

  /// H x W x C in [0, 1].
  nx::Tensor image(std::size_t i) const;
  /// B x H x W x C in [0, 1].
  nx::Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> labels_of(std::span<const std::size_t> indices) const;
  /// Keeps the listed images in order.
  ImageDataset subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts() const;

  friend bool operator==(const ImageDataset&, const ImageDataset&) = default;
};

/// MMX1: "MMX1", u32 N, H, W, C, num_classes (little-endian), pixels, labels.
std::vector<std::uint8_t> encode_dataset(const ImageDataset& ds);
/// Distinct IoError messages: "bad magic", "truncated payload", "dim overflow",
/// "trailing bytes"; DomainError for a label out of range.
ImageDataset decode_dataset(const std::vector<std::uint8_t>& bytes, const std::string& what = "dataset");
void save_dataset(const ImageDataset& ds, const std::filesystem::path& path);
ImageDataset load_dataset(const std::filesystem::path& path);
/// CIFAR-style binary: records of one label byte then a planar 32x32x3 image.
/// Converted to interleaved HWC. Not used by the acceptance studies.
ImageDataset load_cifar_binary(const std::filesystem::path& path, std::uint32_t num_classes = 10);

// Caption vocabulary.
namespace vocab {
inline constexpr std::size_t kPad = 0, kBos = 1, kEos = 2;
inline constexpr std::size_t kPromptBegin = 3;  // four prompt tokens
inline constexpr std::size_t kShapeBegin = 7;   // six shapes
inline constexpr std::size_t kColorBegin = 13;  // six colors
inline constexpr std::size_t kSize = 19;
std::string token_name(std::size_t id);
std::vector<std::size_t> prompt();
}  // namespace vocab

/// (image, prompt, target) triples sharing one prompt.
struct CaptionDataset {
  ImageDataset images;
  std::vector<std::size_t> prompt;
  std::vector<std::vector<std::size_t>> targets;

  std::size_t size() const { return targets.size(); }
  CaptionDataset subset(std::span<const std::size_t> indices) const;
  friend bool operator==(const CaptionDataset&, const CaptionDataset&) = default;
};

/// Sidecar next to an MMX1 file: `<file>.captions.json`.
std::filesystem::path captions_path(const std::filesystem::path& dataset);
void save_captions(const CaptionDataset& ds, const std::filesystem::path& dataset);
/// Throws IoError "captions required" when the sidecar is missing.
CaptionDataset load_captions(const std::filesystem::path& dataset);

struct ShapesConfig {
  std::size_t count = 1000;
  std::size_t classes = 5;
  std::size_t image_size = 16;
  std::uint64_t seed = 1;
  double noise = 0.35;         // per-pixel uniform noise amplitude
  double texture = 0.20;       // background stripe amplitude
  double color_jitter = 0.30;  // per-channel shape color jitter
  std::size_t distractors = 3; // small blobs of a random palette color

  void validate() const;
};

/// Colored shapes on textured backgrounds; class k is the (shape, color)
/// pair k / colors, k % colors with colors = min(6, max(2, ceil(sqrt(classes)))).
/// Labels are assigned round-robin.
ImageDataset generate_shapes(const ShapesConfig& cfg);
/// Same images, with target [shape, color, EOS] per image.
CaptionDataset generate_captions(const ShapesConfig& cfg);

std::size_t palette_colors(std::size_t classes);

/// `<file>.manifest.json` with {seed, classes, counts, ...}.
void save_manifest(const ImageDataset& ds, const ShapesConfig& cfg, const std::filesystem::path& dataset);

}  // namespace mergemix::data
