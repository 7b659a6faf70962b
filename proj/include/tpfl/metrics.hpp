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

#ifndef TPFL_METRICS_HPP_
#define TPFL_METRICS_HPP_

#include <cstdint>
#include <span>
#include <string_view>

namespace tpfl {

// F1 assigned to a class with no true and no predicted samples.
enum class EmptyClassF1 { kOne, kZero };

std::string_view empty_class_f1_name(EmptyClassF1 v);
EmptyClassF1 parse_empty_class_f1(std::string_view name);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// Accuracy and unweighted mean of per-class F1 over all `classes`.
ClassificationMetrics classification_metrics(std::span<const std::uint32_t> truth,
                                             std::span<const std::uint32_t> predicted,
                                             std::size_t classes,
                                             EmptyClassF1 empty = EmptyClassF1::kOne);

}  // namespace tpfl

#endif  // TPFL_METRICS_HPP_
