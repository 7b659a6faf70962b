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

#ifndef TPFL_CONFIG_HPP_
#define TPFL_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tpfl/data.hpp"
#include "tpfl/encoders.hpp"
#include "tpfl/federation.hpp"
#include "tpfl/losses.hpp"
#include "tpfl/metrics.hpp"
#include "tpfl/optim.hpp"

namespace tpfl {

// Full declarative description of one experiment. Text form is flat
// `key = value` lines; see README for the key list.
struct ExperimentConfig {
  ProtocolVariant variant = ProtocolVariant::kATPFL;
  std::size_t clients = 10;
  std::size_t clients_per_round = 10;
  std::size_t rounds = 30;
  std::size_t local_epochs = 2;
  std::size_t batch_size = 0;
  double alpha = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  SchedulerKind scheduler = SchedulerKind::kCosine;
  double mu = 1.0;
  double gamma = 0.07;
  TextAugMode text_aug = TextAugMode::kPerClass;
  std::size_t context_length = 4;
  std::optional<std::size_t> class_position;  // nullopt = after the context
  std::size_t token_dim = 64;
  std::size_t embed_dim = 32;
  std::size_t text_hidden = 64;
  std::size_t visual_hidden = 64;
  VisualTemplate visual_template = VisualTemplate::kPadding;
  std::size_t template_size = 2;
  bool visual_prompt = true;
  double prompt_init_std = 0.02;
  std::size_t classes = 8;
  std::size_t shots = 4;
  std::size_t classes_per_client = 2;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 1;
  double noise_sigma = 0.5;
  std::size_t train_per_class = 0;  // 0 = smallest pool the partition needs
  std::size_t test_per_class = 32;
  EmptyClassF1 empty_class_f1 = EmptyClassF1::kOne;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::size_t threads = 1;
  std::string output_dir = "runs/default";
  std::string data_dir;  // empty = generate in memory

  std::size_t resolved_class_position() const { return class_position.value_or(context_length); }
  std::size_t resolved_train_per_class() const;

  BackboneSpec backbone_spec() const;
  SyntheticSpec train_spec() const;
  SyntheticSpec test_spec() const;
  FederationOptions federation_options() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Every cross-field problem, empty when the config is runnable.
std::vector<std::string> validation_problems(const ExperimentConfig& config);
// Throws ConfigError listing every problem.
void validate(const ExperimentConfig& config);

// Parsing collects unknown keys, malformed values and validation problems
// into a single ConfigError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace tpfl

#endif  // TPFL_CONFIG_HPP_
