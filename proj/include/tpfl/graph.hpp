/*
 * Copyright 2026 The TPFL Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TPFL_GRAPH_HPP_
#define TPFL_GRAPH_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "tpfl/tensor.hpp"

namespace tpfl::ad {

enum class OpTag {
  kParameter,
  kConstant,
  kAdd,
  kSub,
  kMulElem,
  kMatmul,
  kTranspose,
  kScale,
  kTanh,
  kExp,
  kLog,
  kSum,
  kSumAxis,
  kL2Normalize,
  kRmsNormalize,
  kDotRows,
  kSoftmax,
  kLogSoftmax,
  kConcat,
  kSlice,
  kMaskedAdd,
  kAddBias,
  kReshape,
  kDetach,
};

const char* op_name(OpTag tag);

class Graph;

// Lightweight handle to a node owned by a Graph. Copies alias the same node.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients of a scalar root with respect to every trainable leaf.
class Gradients {
 public:
  const Tensor& operator[](Var leaf) const;
  bool contains(Var leaf) const { return grads_.contains(leaf.id()); }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  friend class Graph;
  std::unordered_map<std::size_t, Tensor> grads_;
};

// Append-only tape. Nodes are created in dependency order, so node ids are a
// topological order and backward() is a single reverse sweep.
class Graph {
 public:
  using Vjp = std::function<void(Graph&, std::size_t self)>;

  struct Node {
    Tensor value;
    OpTag op;
    std::vector<std::size_t> parents;
    Tensor grad;
    bool requires_grad = false;
    Vjp vjp;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var parameter(Tensor value);
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  // Accumulated gradient of the last backward() pass (zeros before any pass).
  const Tensor& grad(Var v) const { return nodes_.at(v.id()).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  OpTag op(Var v) const { return nodes_.at(v.id()).op; }
  std::span<const std::size_t> parents(Var v) const { return nodes_.at(v.id()).parents; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  // Reverse-mode sweep from a scalar root. Resets all gradient accumulators
  // first, so repeated calls do not accumulate.
  Gradients backward(Var root);

  // Used by op implementations.
  Var emit(OpTag op, Tensor value, std::vector<Var> inputs, Vjp vjp);
  Tensor& grad_mut(std::size_t id) { return nodes_[id].grad; }
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t parent(std::size_t id, std::size_t k) const { return nodes_[id].parents[k]; }

 private:
  // A deque keeps value references handed out by Var::value() valid while
  // the tape grows.
  std::deque<Node> nodes_;
};

// Primitive operations. Shapes must match exactly except for scale()
// (tensor times scalar) and add_bias() (row-wise bias add).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul_elem(Var a, Var b);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var scale(Var a, double c);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var sum(Var a);
Var sum(Var a, std::size_t axis);
Var l2_normalize(Var a, std::size_t axis);
// x / sqrt(mean(x^2) + eps) along `axis`; defined for all-zero slices.
Var rms_normalize(Var a, std::size_t axis, double eps = 1e-8);
Var dot_rows(Var a, Var b);
Var softmax(Var a, std::size_t axis);
Var log_softmax(Var a, std::size_t axis);
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var a, std::size_t begin, std::size_t end, std::size_t axis);
Var masked_add(Var base, Var delta, const Tensor& mask);
Var add_bias(Var a, Var bias);
Var reshape(Var a, Shape shape);
// Identity in the forward pass; blocks gradient flow.
Var detach(Var a);

}  // namespace tpfl::ad

#endif  // TPFL_GRAPH_HPP_
