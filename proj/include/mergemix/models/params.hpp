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
#include <map>
#include <string>
#include <vector>

#include "mergemix/data/rng.hpp"
#include "mergemix/numerics/tape.hpp"
#include "mergemix/numerics/tensor.hpp"

namespace mergemix::models {

/// Ordered registry of named tensors. Insertion order is the serialization
/// and optimizer order.
class ModelParams {
 public:
  static constexpr std::uint32_t kCheckpointVersion = 1;

  /// Throws ConfigError on a duplicate name.
  void add(const std::string& name, nx::Tensor value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;
  const nx::Tensor& get(const std::string& name) const { return values_[index_of(name)]; }
  nx::Tensor& get(const std::string& name) { return values_[index_of(name)]; }

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const nx::Tensor& value(std::size_t i) const { return values_[i]; }
  nx::Tensor& value(std::size_t i) { return values_[i]; }

  std::size_t element_count() const;
  bool all_finite() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<nx::Tensor> values_;
  std::map<std::string, std::size_t> index_;
};

/// Truncated normal(0, std) at +-2 std, by rejection.
nx::Tensor trunc_normal(const nx::Shape& shape, double stddev, data::Rng& rng);

/// Params as tape leaves, looked up by name.
class Bound {
 public:
  Bound(nx::Tape& tape, const ModelParams& params, bool trainable);
  /// Wraps leaves created elsewhere, one per parameter in registry order.
  Bound(const ModelParams& params, std::vector<nx::Var> vars);

  nx::Var operator[](const std::string& name) const { return vars_[params_->index_of(name)]; }
  nx::Var at(std::size_t i) const { return vars_[i]; }
  std::size_t size() const { return vars_.size(); }
  nx::Tape& tape() const { return *tape_; }

 private:
  nx::Tape* tape_;
  const ModelParams* params_;
  std::vector<nx::Var> vars_;
};

/// MMXC: magic, u32 version, then per tensor (u32 name length, name bytes,
/// u32 rank, u32 dims, f64 payload) until end of file. Little-endian.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_params(const ModelParams& params);
ModelParams decode_params(const std::vector<std::uint8_t>& bytes, const std::string& what);

}  // namespace mergemix::models
