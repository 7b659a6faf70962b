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

#ifndef TPFL_EXPERIMENT_HPP_
#define TPFL_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpfl/config.hpp"
#include "tpfl/federation.hpp"

namespace tpfl {

inline constexpr std::string_view kMetricsSchema = "# schema: tpfl-metrics/1";
inline constexpr std::string_view kMetricsHeader =
    "seed,round,accuracy,macro_f1,l_con,l_aug_text,l_aug_visual";

// Everything a single seed needs before the federation starts.
struct SeedWorld {
  Backbone backbone;
  Dataset train;
  Dataset test;
  PartitionPlan plan;
  PromptPair initial;
};

SeedWorld build_world(const ExperimentConfig& config, std::uint64_t seed);
PromptPair initial_prompts(const ExperimentConfig& config, const Backbone& backbone,
                           std::uint64_t init_seed);

struct SeedRun {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::vector<RoundRecord> records;
  RunArtifacts artifacts;
  std::uint64_t backbone_hash_before = 0;
  std::uint64_t backbone_hash_after = 0;
};

struct Summary {
  std::size_t seeds = 0;
  std::size_t failed = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;  // population std
  double f1_mean = 0.0;
  double f1_std = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<SeedRun> runs;
  Summary summary;
};

SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed);

// Mean and population std of the last round of every successful run.
Summary summarize(std::span<const SeedRun> runs);

// One server run per seed. Writes metrics.csv, summary.csv, timing.csv and
// config.ini to `out_dir` when given. Invalid configs throw ConfigError;
// numerical failures are recorded per seed and flagged in the summary.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::optional<std::filesystem::path>& out_dir = {});

std::string metrics_csv(std::span<const SeedRun> runs);
std::string summary_csv(const ExperimentConfig& config, const Summary& summary);
std::string timing_csv(std::span<const SeedRun> runs);

// Writes <out>/seed_<s>/{train,test} for every configured seed.
void generate_datasets(const ExperimentConfig& config, const std::filesystem::path& out_dir);

enum class AblationAxis { kInfoNce, kShots, kClients };

std::string_view axis_name(AblationAxis axis);
AblationAxis parse_axis(std::string_view name);

std::vector<ExperimentConfig> preset_ablation(AblationAxis axis, const ExperimentConfig& base);
double axis_value(AblationAxis axis, const ExperimentConfig& config);

// Final-round metrics of one seed at one sweep position.
struct SweepPoint {
  std::string axis;
  double x = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct PlotRow {
  double x = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

struct PlotData {
  std::string axis;
  std::vector<PlotRow> accuracy;
  std::vector<PlotRow> macro_f1;
};

// Groups points by x (ascending) into mean / population std per metric.
PlotData plot_data(std::span<const SweepPoint> points);
std::string plot_table(const std::vector<PlotRow>& rows);
// Writes <axis>_accuracy.dat and <axis>_macro_f1.dat into out_dir.
PlotData emit_plotdata(std::span<const SweepPoint> points, const std::filesystem::path& out_dir);

std::vector<SweepPoint> sweep_points(AblationAxis axis, const ExperimentResult& result);

}  // namespace tpfl

#endif  // TPFL_EXPERIMENT_HPP_
