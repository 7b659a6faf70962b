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

#ifndef TPFL_FD_HPP_
#define TPFL_FD_HPP_

#include <functional>
#include <span>
#include <vector>

#include "tpfl/tensor.hpp"

namespace tpfl::ad {

using ScalarFn = std::function<double(std::span<const Tensor>)>;

// Central-difference gradient of `fn` at `params`, one coordinate at a time:
// (f(p + h e) - f(p - h e)) / 2h. Independent of the reverse-mode path and
// used as the verification oracle for it.
std::vector<Tensor> fd_gradient(const ScalarFn& fn, std::span<const Tensor> params, double h);

// max_i |analytic_i - numeric_i| / max(max_i |numeric_i|, floor): the worst
// coordinate error relative to the tensor's gradient scale. A per-coordinate
// denominator would turn the O(h^2) truncation error of near-zero
// coordinates into arbitrarily large ratios.
double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-8);

}  // namespace tpfl::ad

#endif  // TPFL_FD_HPP_
