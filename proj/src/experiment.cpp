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

#include "tpfl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include <spdlog/spdlog.h>

#include "tpfl/error.hpp"
#include "tpfl/seeds.hpp"

namespace tpfl {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << text;
}

fs::path seed_dir(const fs::path& root, std::uint64_t seed) {
  return root / ("seed_" + std::to_string(seed));
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

}  // namespace

PromptPair initial_prompts(const ExperimentConfig& config, const Backbone& backbone,
                           std::uint64_t init_seed) {
  Rng rng(init_seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor context({config.context_length, config.token_dim});
  for (double& v : context.data()) v = config.prompt_init_std * dist(rng);
  return PromptPair{
      make_text_prompt(std::move(context), config.resolved_class_position(),
                       backbone.class_embeddings),
      make_visual_prompt(config.visual_template, config.template_size, config.height,
                         config.width, config.channels)};
}

SeedWorld build_world(const ExperimentConfig& config, std::uint64_t seed) {
  const SeedStreams streams = SeedStreams::from_master(seed);
  Backbone backbone = make_backbone(config.backbone_spec(), streams.encoder);
  Dataset train, test;
  if (!config.data_dir.empty()) {
    const fs::path dir = seed_dir(config.data_dir, seed);
    train = load_dataset(dir / "train");
    test = load_dataset(dir / "test");
    if (train.class_count != config.classes || train.image_shape() != Shape{config.height, config.width, config.channels}) {
      throw DataFormatError("dataset in " + dir.string() + " does not match the configuration");
    }
  } else {
    train = generate_synthetic(streams.data, streams.noise, config.train_spec(), Split::kTrain);
    test = generate_synthetic(streams.data, streams.noise, config.test_spec(), Split::kTest);
  }
  PartitionPlan plan = partition_label_skew(train, config.clients, config.classes_per_client,
                                            config.shots, streams.partition);
  PromptPair initial = initial_prompts(config, backbone, streams.init);
  return SeedWorld{std::move(backbone), std::move(train), std::move(test), std::move(plan),
                   std::move(initial)};
}

SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  try {
    const SeedWorld world = build_world(config, seed);
    const SeedStreams streams = SeedStreams::from_master(seed);
    run.backbone_hash_before = world.backbone.fingerprint();
    FederationSetup setup{&world.backbone, &world.train, &world.plan, &world.test,
                          world.initial,   seed,         streams.sampling, streams.patch};
    run.artifacts = server_run(setup, config.federation_options());
    run.records = run.artifacts.records;
    run.backbone_hash_after = world.backbone.fingerprint();
  } catch (const NumericalError& e) {
    run.failed = true;
    run.error = e.what();
    spdlog::warn("seed {} failed: {}", seed, e.what());
  }
  return run;
}

Summary summarize(std::span<const SeedRun> runs) {
  Summary s;
  s.seeds = runs.size();
  std::vector<double> acc, f1;
  for (const SeedRun& r : runs) {
    if (r.failed || r.records.empty()) {
      if (r.failed) ++s.failed;
      continue;
    }
    acc.push_back(r.records.back().accuracy);
    f1.push_back(r.records.back().macro_f1);
  }
  std::tie(s.accuracy_mean, s.accuracy_std) = mean_std(acc);
  std::tie(s.f1_mean, s.f1_std) = mean_std(f1);
  return s;
}

std::string metrics_csv(std::span<const SeedRun> runs) {
  std::string out(kMetricsSchema);
  out += "\n";
  out += kMetricsHeader;
  out += "\n";
  for (const SeedRun& r : runs) {
    for (const RoundRecord& rec : r.records) {
      out += std::to_string(rec.seed) + "," + std::to_string(rec.round) + "," +
             format_double(rec.accuracy) + "," + format_double(rec.macro_f1) + "," +
             format_double(rec.l_con) + "," + format_double(rec.l_aug_text) + "," +
             format_double(rec.l_aug_visual) + "\n";
    }
  }
  return out;
}

std::string summary_csv(const ExperimentConfig& config, const Summary& s) {
  std::string out =
      "variant,seeds,failed,final_accuracy_mean,final_accuracy_std,final_f1_mean,final_f1_std\n";
  out += std::string(variant_name(config.variant)) + "," + std::to_string(s.seeds) + "," +
         std::to_string(s.failed) + "," + format_double(s.accuracy_mean) + "," +
         format_double(s.accuracy_std) + "," + format_double(s.f1_mean) + "," +
         format_double(s.f1_std) + "\n";
  return out;
}

std::string timing_csv(std::span<const SeedRun> runs) {
  std::string out = "seed,round,wall_ms\n";
  for (const SeedRun& r : runs)
    for (const RoundRecord& rec : r.records)
      out += std::to_string(rec.seed) + "," + std::to_string(rec.round) + "," +
             format_double(rec.wall_ms) + "\n";
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::optional<fs::path>& out_dir) {
  validate(config);
  ExperimentResult result;
  result.config = config;
  for (std::uint64_t seed : config.seeds) {
    spdlog::info("{}: seed {} ({} rounds, M={}, K={})", variant_name(config.variant), seed,
                 config.rounds, config.clients, config.clients_per_round);
    result.runs.push_back(run_seed(config, seed));
    if (!result.runs.back().records.empty()) {
      const RoundRecord& last = result.runs.back().records.back();
      spdlog::info("seed {} final accuracy {:.4f} macro-F1 {:.4f}", seed, last.accuracy,
                   last.macro_f1);
    }
  }
  result.summary = summarize(result.runs);
  if (out_dir) {
    std::error_code ec;
    fs::create_directories(*out_dir, ec);
    if (ec) throw Error("io", "cannot create " + out_dir->string() + ": " + ec.message());
    write_text(*out_dir / "metrics.csv", metrics_csv(result.runs));
    write_text(*out_dir / "summary.csv", summary_csv(config, result.summary));
    write_text(*out_dir / "timing.csv", timing_csv(result.runs));
    write_text(*out_dir / "config.ini", serialize_config(config));
  }
  return result;
}

void generate_datasets(const ExperimentConfig& config, const fs::path& out_dir) {
  validate(config);
  for (std::uint64_t seed : config.seeds) {
    const SeedStreams streams = SeedStreams::from_master(seed);
    const fs::path dir = seed_dir(out_dir, seed);
    save_dataset(generate_synthetic(streams.data, streams.noise, config.train_spec(), Split::kTrain),
                 dir / "train");
    save_dataset(generate_synthetic(streams.data, streams.noise, config.test_spec(), Split::kTest),
                 dir / "test");
    spdlog::info("wrote datasets for seed {} to {}", seed, dir.string());
  }
}

std::string_view axis_name(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kInfoNce: return "infonce";
    case AblationAxis::kShots: return "shots";
    case AblationAxis::kClients: return "clients";
  }
  return "infonce";
}

AblationAxis parse_axis(std::string_view name) {
  if (name == "infonce") return AblationAxis::kInfoNce;
  if (name == "shots") return AblationAxis::kShots;
  if (name == "clients") return AblationAxis::kClients;
  throw DomainError("unknown ablation axis '" + std::string(name) + "'");
}

std::vector<ExperimentConfig> preset_ablation(AblationAxis axis, const ExperimentConfig& base) {
  std::vector<ExperimentConfig> out;
  auto point = [&](auto mutate, const std::string& tag) {
    ExperimentConfig c = base;
    mutate(c);
    c.output_dir = (fs::path(base.output_dir) / (std::string(axis_name(axis)) + "_" + tag)).string();
    out.push_back(std::move(c));
  };
  switch (axis) {
    case AblationAxis::kInfoNce: {
      const double on = base.mu > 0.0 ? base.mu : ExperimentConfig{}.mu;
      point([](ExperimentConfig& c) { c.variant = ProtocolVariant::kATPFL; c.mu = 0.0; }, "off");
      point([on](ExperimentConfig& c) { c.variant = ProtocolVariant::kATPFL; c.mu = on; }, "on");
      break;
    }
    case AblationAxis::kShots:
      for (std::size_t n : {1, 2, 4, 8, 16}) {
        point([n](ExperimentConfig& c) { c.shots = n; c.train_per_class = 0; },
              std::to_string(n));
      }
      break;
    case AblationAxis::kClients:
      for (std::size_t m : {10, 25, 50, 100}) {
        point([m](ExperimentConfig& c) {
                c.clients = m;
                c.clients_per_round = m;
                c.train_per_class = 0;
              },
              std::to_string(m));
      }
      break;
  }
  return out;
}

double axis_value(AblationAxis axis, const ExperimentConfig& config) {
  switch (axis) {
    case AblationAxis::kInfoNce: return config.variant == ProtocolVariant::kATPFL ? config.mu : 0.0;
    case AblationAxis::kShots: return static_cast<double>(config.shots);
    case AblationAxis::kClients: return static_cast<double>(config.clients);
  }
  return 0.0;
}

std::vector<SweepPoint> sweep_points(AblationAxis axis, const ExperimentResult& result) {
  std::vector<SweepPoint> out;
  for (const SeedRun& r : result.runs) {
    if (r.failed || r.records.empty()) continue;
    out.push_back(SweepPoint{std::string(axis_name(axis)), axis_value(axis, result.config), r.seed,
                             r.records.back().accuracy, r.records.back().macro_f1});
  }
  return out;
}

PlotData plot_data(std::span<const SweepPoint> points) {
  if (points.empty()) throw DomainError("plot data: no points");
  PlotData out;
  out.axis = points.front().axis;
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_x;
  for (const SweepPoint& p : points) {
    if (p.axis != out.axis) {
      throw DomainError("plot data: mixed sweep axes '" + out.axis + "' and '" + p.axis + "'");
    }
    by_x[p.x].first.push_back(p.accuracy);
    by_x[p.x].second.push_back(p.macro_f1);
  }
  for (const auto& [x, metrics] : by_x) {
    const auto [am, as] = mean_std(metrics.first);
    const auto [fm, fs_] = mean_std(metrics.second);
    out.accuracy.push_back(PlotRow{x, am, as});
    out.macro_f1.push_back(PlotRow{x, fm, fs_});
  }
  return out;
}

std::string plot_table(const std::vector<PlotRow>& rows) {
  std::string out = "# x mean std\n";
  for (const PlotRow& r : rows) {
    out += format_double(r.x) + " " + format_double(r.mean) + " " + format_double(r.std) + "\n";
  }
  return out;
}

PlotData emit_plotdata(std::span<const SweepPoint> points, const fs::path& out_dir) {
  PlotData data = plot_data(points);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("io", "cannot create " + out_dir.string() + ": " + ec.message());
  write_text(out_dir / (data.axis + "_accuracy.dat"), plot_table(data.accuracy));
  write_text(out_dir / (data.axis + "_macro_f1.dat"), plot_table(data.macro_f1));
  return data;
}

}  // namespace tpfl
