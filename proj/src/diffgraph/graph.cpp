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

#include "tpfl/graph.hpp"

#include <algorithm>

#include "tpfl/error.hpp"

namespace tpfl::ad {

const char* op_name(OpTag tag) {
  switch (tag) {
    case OpTag::kParameter: return "parameter";
    case OpTag::kConstant: return "constant";
    case OpTag::kAdd: return "add";
    case OpTag::kSub: return "sub";
    case OpTag::kMulElem: return "mul_elem";
    case OpTag::kMatmul: return "matmul";
    case OpTag::kTranspose: return "transpose";
    case OpTag::kScale: return "scale";
    case OpTag::kTanh: return "tanh";
    case OpTag::kExp: return "exp";
    case OpTag::kLog: return "log";
    case OpTag::kSum: return "sum";
    case OpTag::kSumAxis: return "sum_axis";
    case OpTag::kL2Normalize: return "l2_normalize";
    case OpTag::kRmsNormalize: return "rms_normalize";
    case OpTag::kDotRows: return "dot_rows";
    case OpTag::kSoftmax: return "softmax";
    case OpTag::kLogSoftmax: return "log_softmax";
    case OpTag::kConcat: return "concat";
    case OpTag::kSlice: return "slice";
    case OpTag::kMaskedAdd: return "masked_add";
    case OpTag::kAddBias: return "add_bias";
    case OpTag::kReshape: return "reshape";
    case OpTag::kDetach: return "detach";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->value(*this); }

const Tensor& Gradients::operator[](Var leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) {
    throw Error("graph", "gradients: node " + std::to_string(leaf.id()) +
                             " is not a trainable leaf");
  }
  return it->second;
}

Var Graph::parameter(Tensor value) {
  Shape shape = value.shape();
  nodes_.push_back(Node{std::move(value), OpTag::kParameter, {}, Tensor(std::move(shape)),
                        true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Shape shape = value.shape();
  nodes_.push_back(Node{std::move(value), OpTag::kConstant, {}, Tensor(std::move(shape)),
                        false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Graph::emit(OpTag op, Tensor value, std::vector<Var> inputs, Vjp vjp) {
  Node node;
  node.op = op;
  node.grad = Tensor(value.shape());
  node.value = std::move(value);
  node.parents.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.graph() != this) {
      throw Error("graph", std::string(op_name(op)) + ": inputs belong to another graph");
    }
    node.parents.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.vjp = std::move(vjp);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Graph::backward(Var root) {
  if (&root.graph() != this) throw Error("graph", "backward: root belongs to another graph");
  const Node& r = nodes_.at(root.id());
  if (r.value.size() != 1 || r.value.rank() > 1) {
    throw ShapeError("backward: root must be a scalar, got shape " +
                     shape_string(r.value.shape()));
  }
  for (Node& n : nodes_) std::fill(n.grad.data().begin(), n.grad.data().end(), 0.0);
  nodes_[root.id()].grad[0] = 1.0;
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.vjp) n.vjp(*this, id);
  }
  Gradients out;
  for (std::size_t id = 0; id <= root.id(); ++id) {
    if (nodes_[id].op == OpTag::kParameter) out.grads_.emplace(id, nodes_[id].grad);
  }
  return out;
}

}  // namespace tpfl::ad
