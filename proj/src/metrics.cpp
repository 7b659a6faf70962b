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

#include "tpfl/metrics.hpp"

#include <string>
#include <vector>

#include "tpfl/error.hpp"

namespace tpfl {

std::string_view empty_class_f1_name(EmptyClassF1 v) {
  return v == EmptyClassF1::kZero ? "zero" : "one";
}

EmptyClassF1 parse_empty_class_f1(std::string_view name) {
  if (name == "one") return EmptyClassF1::kOne;
  if (name == "zero") return EmptyClassF1::kZero;
  throw DomainError("unknown empty-class F1 convention '" + std::string(name) + "'");
}

ClassificationMetrics classification_metrics(std::span<const std::uint32_t> truth,
                                             std::span<const std::uint32_t> predicted,
                                             std::size_t classes, EmptyClassF1 empty) {
  if (truth.size() != predicted.size()) {
    throw ShapeError("metrics: " + std::to_string(truth.size()) + " labels vs " +
                     std::to_string(predicted.size()) + " predictions");
  }
  if (truth.empty()) throw DomainError("metrics: empty evaluation set");
  std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::uint32_t t = truth[i], p = predicted[i];
    if (t >= classes || p >= classes) throw DomainError("metrics: label out of range");
    if (t == p) {
      ++correct;
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) {
      f1_sum += empty == EmptyClassF1::kOne ? 1.0 : 0.0;
    } else {
      f1_sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    }
  }
  return ClassificationMetrics{
      static_cast<double>(correct) / static_cast<double>(truth.size()),
      f1_sum / static_cast<double>(classes)};
}

}  // namespace tpfl
