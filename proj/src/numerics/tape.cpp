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

#include "mergemix/numerics/tape.hpp"

#include <cmath>
#include <string>

#include "mergemix/error.hpp"

namespace mergemix::nx {

Var Tape::leaf(const Tensor& t) {
  if (!t.all_finite()) throw NumericError("non-finite value in input tensor");
  Node n;
  n.value = t;
  n.op = "leaf";
  n.needs_grad = t.requires_grad();
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor t) {
  t.set_requires_grad(false);
  return leaf(t);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<std::size_t> parents,
                 Backward backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by op '" + std::string(op) + "'");
  }
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (std::size_t p : parents) {
    if (p >= nodes_.size()) throw ShapeError("op '" + std::string(op) + "' references unknown node");
    n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
  }
  n.parents = std::move(parents);
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return Tensor(n.value.shape(), n.grad);
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ShapeError("backward() on a var from another tape");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " +
                     shape_string(value(loss.id()).shape()));
  }
  for (Node& n : nodes_) n.grad.clear();
  backward_visits_ = 0;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
    ++backward_visits_;
    n.backward(*this, i);
  }
  for (std::size_t i = 0; i <= loss.id(); ++i) {
    for (double g : nodes_[i].grad) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient reached op '" + std::string(nodes_[i].op) + "'");
      }
    }
  }
}

}  // namespace mergemix::nx
