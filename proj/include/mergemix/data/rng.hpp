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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace mergemix::data {

std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** seeded through splitmix64. Every distribution below is
/// implemented here rather than through <random> so that streams are
/// identical across standard libraries.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "xoshiro256**/splitmix64";

  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// [0, 1) with 53 random bits.
  double uniform();
  /// (0, 1]
  double uniform_open_low() { return 1.0 - uniform(); }
  /// Box-Muller, cosine branch only: each call consumes two uniforms.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Marsaglia-Tsang; shape < 1 uses the u^(1/shape) boost.
  double gamma(double shape);
  double beta(double a, double b);
  /// Uniform integer in [0, n) without modulo bias.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace mergemix::data
