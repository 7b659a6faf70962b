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

#include "tpfl/fd.hpp"

#include <algorithm>
#include <cmath>

#include "tpfl/error.hpp"

namespace tpfl::ad {

std::vector<Tensor> fd_gradient(const ScalarFn& fn, std::span<const Tensor> params, double h) {
  if (!(h > 0.0)) throw DomainError("fd_gradient: step must be positive");
  std::vector<Tensor> work(params.begin(), params.end());
  std::vector<Tensor> grads;
  grads.reserve(work.size());
  for (std::size_t p = 0; p < work.size(); ++p) {
    Tensor g(work[p].shape());
    for (std::size_t i = 0; i < work[p].size(); ++i) {
      const double orig = work[p][i];
      work[p][i] = orig + h;
      const double up = fn(work);
      work[p][i] = orig - h;
      const double down = fn(work);
      work[p][i] = orig;
      g[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor) {
  if (analytic.shape() != numeric.shape()) {
    throw ShapeError("max_relative_error: " + shape_string(analytic.shape()) + " vs " +
                     shape_string(numeric.shape()));
  }
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]));
    scale = std::max(scale, std::abs(numeric[i]));
  }
  worst /= std::max(scale, floor);
  return worst;
}

}  // namespace tpfl::ad
