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

#ifndef TPFL_OPTIM_HPP_
#define TPFL_OPTIM_HPP_

#include <cstddef>
#include <string_view>

#include "tpfl/tensor.hpp"

namespace tpfl {

enum class OptimizerKind { kSgd, kAdam };
enum class SchedulerKind { kNone, kCosine };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);
std::string_view scheduler_name(SchedulerKind kind);
SchedulerKind parse_scheduler(std::string_view name);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Update rule and state for one parameter tensor.
class ParamOptimizer {
 public:
  ParamOptimizer() = default;
  ParamOptimizer(OptimizerKind kind, const Shape& shape, AdamHyper hyper = {});

  void step(Tensor& param, const Tensor& grad, double lr);
  std::size_t steps() const noexcept { return steps_; }

 private:
  OptimizerKind kind_ = OptimizerKind::kSgd;
  AdamHyper hyper_;
  Tensor m_;
  Tensor v_;
  std::size_t steps_ = 0;
};

// Learning rate for 1-based `round` out of `total_rounds`. Cosine decays from
// `base` at round 1 towards zero, half a period over the run.
double scheduled_lr(double base, SchedulerKind kind, std::size_t round, std::size_t total_rounds);

}  // namespace tpfl

#endif  // TPFL_OPTIM_HPP_
