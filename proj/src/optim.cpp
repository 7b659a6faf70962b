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

#include "tpfl/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tpfl/error.hpp"

namespace tpfl {

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw DomainError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view scheduler_name(SchedulerKind kind) {
  return kind == SchedulerKind::kCosine ? "cosine" : "none";
}

SchedulerKind parse_scheduler(std::string_view name) {
  if (name == "none") return SchedulerKind::kNone;
  if (name == "cosine") return SchedulerKind::kCosine;
  throw DomainError("unknown scheduler '" + std::string(name) + "'");
}

ParamOptimizer::ParamOptimizer(OptimizerKind kind, const Shape& shape, AdamHyper hyper)
    : kind_(kind), hyper_(hyper) {
  if (kind_ == OptimizerKind::kAdam) {
    m_ = Tensor(shape);
    v_ = Tensor(shape);
  }
}

void ParamOptimizer::step(Tensor& param, const Tensor& grad, double lr) {
  if (param.shape() != grad.shape()) {
    throw ShapeError("optimizer: parameter " + shape_string(param.shape()) + " vs gradient " +
                     shape_string(grad.shape()));
  }
  ++steps_;
  if (kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
    return;
  }
  if (m_.shape() != param.shape()) throw ShapeError("optimizer: state shape mismatch");
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(hyper_.beta1, t);
  const double c2 = 1.0 - std::pow(hyper_.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    m_[i] = hyper_.beta1 * m_[i] + (1.0 - hyper_.beta1) * grad[i];
    v_[i] = hyper_.beta2 * v_[i] + (1.0 - hyper_.beta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper_.eps);
  }
}

double scheduled_lr(double base, SchedulerKind kind, std::size_t round, std::size_t total_rounds) {
  if (kind == SchedulerKind::kNone || total_rounds == 0) return base;
  const double progress =
      static_cast<double>(round - 1) / static_cast<double>(total_rounds);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace tpfl
