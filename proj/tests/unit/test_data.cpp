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

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mergemix/data/dataset.hpp"
#include "mergemix/data/rng.hpp"
#include "mergemix/error.hpp"
#include "mergemix/io/binary.hpp"

using namespace mergemix;
using namespace mergemix::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mergemix_test_data";
  fs::create_directories(dir);
  return dir / name;
}

ImageDataset random_dataset(Rng& rng) {
  ImageDataset ds{static_cast<std::uint32_t>(1 + rng.below(6)), static_cast<std::uint32_t>(1 + rng.below(6)),
                  static_cast<std::uint32_t>(1 + rng.below(3)), static_cast<std::uint32_t>(2 + rng.below(10)),
                  {}, {}};
  const std::size_t n = rng.below(12);
  for (std::size_t k = 0; k < n * ds.image_bytes(); ++k) ds.pixels.push_back(static_cast<std::uint8_t>(rng.below(256)));
  for (std::size_t k = 0; k < n; ++k) ds.labels.push_back(static_cast<std::uint8_t>(rng.below(ds.num_classes)));
  return ds;
}

std::string message_of(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_dataset(bytes);
  } catch (const IoError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("generate_shapes is deterministic per seed") {
  ShapesConfig cfg;
  cfg.count = 40;
  cfg.image_size = 16;
  const ImageDataset a = generate_shapes(cfg), b = generate_shapes(cfg);
  CHECK(encode_dataset(a) == encode_dataset(b));
  cfg.seed = 2;
  CHECK(generate_shapes(cfg).pixels != a.pixels);
  CHECK(a.height == 16);
  CHECK(a.channels == 3);
}

TEST_CASE("class histogram is balanced within one") {
  for (std::size_t classes : {2, 3, 5, 7, 36}) {
    for (std::size_t n : {1, 10, 99}) {
      ShapesConfig cfg;
      cfg.count = n;
      cfg.classes = classes;
      cfg.image_size = 8;
      const auto counts = generate_shapes(cfg).class_counts();
      const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
      CHECK(*hi - *lo <= 1);
    }
  }
}

TEST_CASE("generator rejects bad configs") {
  ShapesConfig cfg;
  cfg.classes = 1;
  CHECK_THROWS_AS(generate_shapes(cfg), ConfigError);
  cfg.classes = 37;
  CHECK_THROWS_AS(generate_shapes(cfg), ConfigError);
  cfg.classes = 5;
  cfg.image_size = 4;
  CHECK_THROWS_AS(generate_shapes(cfg), ConfigError);
}

TEST_CASE("classes map to distinct shape and color pairs") {
  CHECK(palette_colors(2) == 2);
  CHECK(palette_colors(5) == 3);
  CHECK(palette_colors(36) == 6);
  ShapesConfig cfg;
  cfg.count = 10;
  const CaptionDataset caps = generate_captions(cfg);
  REQUIRE(caps.size() == 10);
  CHECK(caps.prompt == vocab::prompt());
  for (std::size_t i = 0; i < caps.size(); ++i) {
    const std::size_t label = caps.images.labels[i];
    const auto& t = caps.targets[i];
    REQUIRE(t.size() == 3);
    CHECK(t[0] == vocab::kShapeBegin + label / 3);
    CHECK(t[1] == vocab::kColorBegin + label % 3);
    CHECK(t[2] == vocab::kEos);
    for (std::size_t id : t) CHECK(id < vocab::kSize);
  }
  CHECK(vocab::token_name(vocab::kShapeBegin) == "square");
  CHECK(vocab::token_name(vocab::kColorBegin + 5) == "cyan");
}

TEST_CASE("shape pixels differ from the background") {
  ShapesConfig cfg;
  cfg.count = 5;
  cfg.noise = 0;
  cfg.texture = 0;
  cfg.distractors = 0;
  const ImageDataset ds = generate_shapes(cfg);
  // Class 0 is red: the image must contain a strongly red pixel.
  const nx::Tensor img = ds.image(0);
  bool red = false;
  for (std::size_t k = 0; k < img.size(); k += 3) red = red || (img[k] > 0.7 && img[k + 1] < 0.35);
  CHECK(red);
}

TEST_CASE("MMX1 round trip is byte identical") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const ImageDataset ds = random_dataset(rng);
    const auto bytes = encode_dataset(ds);
    const ImageDataset back = decode_dataset(bytes);
    CHECK(back == ds);
    CHECK(encode_dataset(back) == bytes);
  }
  ShapesConfig cfg;
  cfg.count = 10;
  cfg.image_size = 8;
  const ImageDataset ds = generate_shapes(cfg);
  const fs::path path = scratch("ten.mmx1");
  save_dataset(ds, path);
  CHECK(load_dataset(path) == ds);
  CHECK(io::read_file(path.string()) == encode_dataset(ds));
}

TEST_CASE("MMX1 errors are distinct") {
  ShapesConfig cfg;
  cfg.count = 4;
  cfg.image_size = 8;
  const auto good = encode_dataset(generate_shapes(cfg));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(message_of(bad_magic).find("bad magic") != std::string::npos);
  CHECK(message_of({}).find("bad magic") != std::string::npos);

  auto bigger_n = good;
  bigger_n[4] = 5;  // N declared 5, payload holds 4
  CHECK(message_of(bigger_n).find("truncated payload") != std::string::npos);
  auto cut = good;
  cut.resize(cut.size() - 1);
  CHECK(message_of(cut).find("truncated payload") != std::string::npos);
  auto header_only = good;
  header_only.resize(10);
  CHECK(message_of(header_only).find("truncated payload") != std::string::npos);

  auto huge = good;
  for (int k : {8, 9, 10, 11, 12, 13, 14, 15}) huge[k] = 0xff;  // H, W ~ 4e9
  CHECK(message_of(huge).find("dim overflow") != std::string::npos);

  auto extra = good;
  extra.push_back(0);
  CHECK(message_of(extra).find("trailing bytes") != std::string::npos);

  auto bad_label = good;
  bad_label.back() = 9;
  CHECK_THROWS_AS(decode_dataset(bad_label), DomainError);
}

TEST_CASE("dataset batches convert to unit range") {
  ImageDataset ds{1, 2, 1, 2, {0, 255, 51, 102}, {0, 1}};
  const std::vector<std::size_t> idx{1, 0};
  const nx::Tensor b = ds.batch(idx);
  CHECK(b.shape() == nx::Shape{2, 1, 2, 1});
  CHECK(b[0] == doctest::Approx(0.2));
  CHECK(b[3] == 1.0);
  CHECK(ds.labels_of(idx) == std::vector<std::size_t>{1, 0});
  const ImageDataset sub = ds.subset(idx);
  CHECK(sub.labels == std::vector<std::uint8_t>{1, 0});
  CHECK(sub.pixels == std::vector<std::uint8_t>{51, 102, 0, 255});
  CHECK_THROWS_AS(ds.image(2), DomainError);
}

TEST_CASE("captions sidecar and manifest") {
  ShapesConfig cfg;
  cfg.count = 6;
  cfg.image_size = 8;
  cfg.seed = 11;
  const CaptionDataset caps = generate_captions(cfg);
  const fs::path path = scratch("caps.mmx1");
  fs::remove(captions_path(path));
  save_dataset(caps.images, path);
  CHECK_THROWS_WITH_AS(load_captions(path), doctest::Contains("captions required"), IoError);
  save_captions(caps, path);
  CHECK(load_captions(path) == caps);

  save_manifest(caps.images, cfg, path);
  const auto j = nlohmann::json::parse(io::read_text(path.string() + ".manifest.json"));
  CHECK(j.at("seed") == 11);
  CHECK(j.at("classes") == 5);
  CHECK(j.at("counts") == std::vector<std::size_t>{2, 1, 1, 1, 1});
}

TEST_CASE("CIFAR-style binaries convert planar to interleaved") {
  std::vector<std::uint8_t> rec(1 + 3 * 1024, 0);
  rec[0] = 3;
  rec[1] = 10;            // R at (0,0)
  rec[1 + 1024] = 20;     // G at (0,0)
  rec[1 + 2048 + 1] = 30; // B at (0,1)
  const fs::path path = scratch("cifar.bin");
  io::write_file(path.string(), rec);
  const ImageDataset ds = load_cifar_binary(path);
  REQUIRE(ds.size() == 1);
  CHECK(ds.labels[0] == 3);
  CHECK(ds.pixels[0] == 10);
  CHECK(ds.pixels[1] == 20);
  CHECK(ds.pixels[5] == 30);
  rec.pop_back();
  io::write_file(path.string(), rec);
  CHECK_THROWS_AS(load_cifar_binary(path), IoError);
}
