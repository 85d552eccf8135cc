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

#include "mergemix/models/params.hpp"

#include <cstring>

#include "mergemix/error.hpp"
#include "mergemix/io/binary.hpp"

namespace mergemix::models {
namespace {

constexpr char kMagic[4] = {'M', 'M', 'X', 'C'};

}  // namespace

void ModelParams::add(const std::string& name, nx::Tensor value) {
  if (contains(name)) throw ConfigError("params: duplicate name " + name);
  index_[name] = values_.size();
  names_.push_back(name);
  value.set_requires_grad(false);
  values_.push_back(std::move(value));
}

std::size_t ModelParams::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("params: no tensor named " + name);
  return it->second;
}

std::size_t ModelParams::element_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& v : values_) {
    if (!v.all_finite()) return false;
  }
  return true;
}

nx::Tensor trunc_normal(const nx::Shape& shape, double stddev, data::Rng& rng) {
  nx::Tensor t(shape);
  for (double& v : t.data()) {
    double z;
    do {
      z = rng.normal();
    } while (z < -2.0 || z > 2.0);
    v = z * stddev;
  }
  return t;
}

Bound::Bound(nx::Tape& tape, const ModelParams& params, bool trainable)
    : tape_(&tape), params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (trainable) {
      nx::Tensor t = params.value(i);
      t.set_requires_grad(true);
      vars_.push_back(tape.leaf(t));
    } else {
      vars_.push_back(tape.constant(params.value(i)));
    }
  }
}

Bound::Bound(const ModelParams& params, std::vector<nx::Var> vars)
    : tape_(vars.empty() ? nullptr : &vars.front().tape()), params_(&params), vars_(std::move(vars)) {
  if (vars_.size() != params.size()) {
    throw ShapeError("bound: " + std::to_string(vars_.size()) + " vars for " +
                     std::to_string(params.size()) + " params");
  }
}

std::vector<std::uint8_t> encode_params(const ModelParams& params) {
  io::ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(ModelParams::kCheckpointVersion);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    const nx::Tensor& t = params.value(i);
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f64(v);
  }
  return w.buffer();
}

ModelParams decode_params(const std::vector<std::uint8_t>& buf, const std::string& what) {
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) throw IoError(what + ": bad magic");
  io::ByteReader r(buf, what);
  char magic[4];
  r.bytes(magic, 4);
  const std::uint32_t version = r.u32();
  if (version != ModelParams::kCheckpointVersion) {
    throw IoError(what + ": unsupported version " + std::to_string(version));
  }
  ModelParams params;
  while (!r.done()) {
    std::string name(r.u32(), '\0');
    r.bytes(name.data(), name.size());
    const std::uint32_t rank = r.u32();
    if (std::size_t{rank} * 4 > r.remaining()) throw IoError(what + ": truncated payload");
    nx::Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = r.u32();
      count *= d;
      if (count > r.remaining()) throw IoError(what + ": truncated payload");
    }
    if (count * 8 > r.remaining()) throw IoError(what + ": truncated payload");
    nx::Tensor t(shape);
    for (double& v : t.data()) v = r.f64();
    params.add(name, std::move(t));
  }
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  io::write_file(path.string(), encode_params(params));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  return decode_params(io::read_file(path.string()), "checkpoint " + path.string());
}

}  // namespace mergemix::models
