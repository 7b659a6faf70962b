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

#ifndef TPFL_FEDERATION_HPP_
#define TPFL_FEDERATION_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tpfl/data.hpp"
#include "tpfl/encoders.hpp"
#include "tpfl/losses.hpp"
#include "tpfl/metrics.hpp"
#include "tpfl/optim.hpp"
#include "tpfl/seeds.hpp"

namespace tpfl {

enum class ProtocolVariant { kLocalOnly, kPromptFL, kTPFL, kATPFL };

std::string_view variant_name(ProtocolVariant v);
ProtocolVariant parse_variant(std::string_view name);

struct FederationOptions {
  ProtocolVariant variant = ProtocolVariant::kATPFL;
  std::size_t clients = 10;            // M
  std::size_t clients_per_round = 10;  // K
  std::size_t rounds = 30;             // T_g
  std::size_t local_epochs = 2;        // T_loc
  std::size_t batch_size = 0;          // 0 = whole local set
  double alpha = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  SchedulerKind scheduler = SchedulerKind::kCosine;
  LossOptions loss;
  bool visual_prompt = true;
  EmptyClassF1 empty_class_f1 = EmptyClassF1::kOne;
  std::size_t threads = 1;
  // Dispatch participating clients in descending id order. Only affects
  // scheduling; results must not change.
  bool reverse_dispatch = false;

  // mu actually used: the configured value for ATPFL, zero otherwise.
  double effective_mu() const;
  // False for PromptFL or when the visual prompt is switched off.
  bool visual_enabled() const;
};

struct ClientOptimizer {
  ParamOptimizer context;
  ParamOptimizer delta;
};

struct ClientState {
  std::size_t id = 0;
  Batch data;
  std::size_t sample_count = 0;  // n_k, fixed for the run
  PromptPair current;
  PromptPair previous;  // refreshed once per participated round
  ClientOptimizer optimizer;
  Rng patch_rng;
};

struct GlobalPrompts {
  PromptPair prompts;
  std::size_t round = 0;
};

struct ClientResult {
  std::size_t client_id = 0;
  std::size_t sample_count = 0;
  PromptPair prompts;
  LossBreakdown mean_loss;
};

// Caches the client's previous prompts, restarts from the received global
// prompts (except local-only, which keeps its own), then runs local_epochs
// passes of mini-batch optimisation of the combined objective.
ClientResult client_update(ClientState& client, const GlobalPrompts& global,
                           const Backbone& backbone, const FederationOptions& opts,
                           std::size_t round, double lr);

struct Contribution {
  std::size_t client_id = 0;
  std::size_t samples = 0;
  PromptPair prompts;
};

// Sample-weighted mean of the contributed prompts, summed in ascending client
// id order.
PromptPair aggregate_prompts(std::span<const Contribution> contributions);

// K of M client ids, uniform without replacement, sorted ascending.
std::vector<std::size_t> sample_clients(std::size_t clients, std::size_t per_round,
                                        std::size_t round, std::uint64_t seed);

// Row-wise argmax of <z_vis_i, z_text_c>; ties go to the lowest class id.
std::vector<std::uint32_t> nearest_class(const Tensor& z_text, const Tensor& z_vis);
// nearest_class on the prompted embeddings of the batch (patch at the origin).
std::vector<std::uint32_t> predict(const PromptPair& prompts, const Backbone& backbone,
                                   const Batch& batch);
ClassificationMetrics evaluate(const PromptPair& prompts, const Backbone& backbone,
                               const Batch& test, EmptyClassF1 empty = EmptyClassF1::kOne);

struct RoundRecord {
  std::uint64_t seed = 0;
  std::size_t round = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double l_con = 0.0;
  double l_aug_text = 0.0;
  double l_aug_visual = 0.0;
  double wall_ms = 0.0;
};

struct FederationSetup {
  const Backbone* backbone = nullptr;
  const Dataset* train = nullptr;
  const PartitionPlan* plan = nullptr;
  const Dataset* test = nullptr;
  PromptPair initial;
  std::uint64_t run_seed = 0;
  std::uint64_t sampling_seed = 0;
  std::uint64_t patch_seed = 0;
};

struct RunArtifacts {
  GlobalPrompts global;
  std::vector<RoundRecord> records;
  std::vector<PromptPair> client_prompts;
};

std::vector<ClientState> make_clients(const FederationSetup& setup, const FederationOptions& opts);

// Rounds 1..T_g of sample, dispatch, aggregate, evaluate. T_g = 0 returns the
// initial prompts with no records.
RunArtifacts server_run(const FederationSetup& setup, const FederationOptions& opts);

}  // namespace tpfl

#endif  // TPFL_FEDERATION_HPP_
