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
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mergemix/numerics/tensor.hpp"

namespace mergemix::nx {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as
/// the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so insertion
/// order is a topological order and backward() is a single reverse sweep.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records an input. Gradients are tracked iff t.requires_grad().
  Var leaf(const Tensor& t);
  Var constant(Tensor t);

  /// Used by op implementations. Throws NumericError naming `op` if the
  /// value holds NaN/Inf.
  Var record(std::string_view op, Tensor value, std::vector<std::size_t> parents,
             Backward backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one value.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Accumulation buffer for node `id`, zero-initialized on first use.
  std::span<double> grad_buffer(std::size_t id);
  /// Gradient of the last backward() w.r.t. `v` (zeros if unreached).
  Tensor grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  std::string_view op_name(std::size_t id) const { return nodes_[id].op; }
  std::size_t backward_visits() const { return backward_visits_; }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    std::vector<std::size_t> parents;
    Backward backward;
    std::string_view op;
    bool needs_grad = false;
  };

  std::deque<Node> nodes_;
  std::size_t backward_visits_ = 0;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace mergemix::nx
