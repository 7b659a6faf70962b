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

// Command-line front end: run, ablate, gen-data, validate.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tpfl/config.hpp"
#include "tpfl/error.hpp"
#include "tpfl/experiment.hpp"

namespace {

namespace fs = std::filesystem;

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  if (const char* level = std::getenv("TPFL_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

int report(const std::string& kind, const std::string& message,
           const std::vector<std::string>& problems = {}) {
  nlohmann::json j = {{"error", kind}, {"message", message}};
  if (!problems.empty()) j["problems"] = problems;
  std::cerr << j.dump() << "\n";
  return kind == "config" ? 2 : 1;
}

void print_summary(const tpfl::ExperimentResult& r) {
  std::cout << tpfl::summary_csv(r.config, r.summary);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Federated prompt-tuning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::string out_dir;
  std::string axis;

  auto* run = app.add_subcommand("run", "Run one experiment over all configured seeds");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--seed-override", seed_override, "Run only this seed");
  run->add_option("--out", out_dir, "Output directory (default: output_dir from config)");

  auto* ablate = app.add_subcommand("ablate", "Run a preset ablation sweep");
  ablate->add_option("--axis", axis, "infonce | shots | clients")->required();
  ablate->add_option("--config", config_path, "Base config file")->required();
  ablate->add_option("--out", out_dir, "Output root (default: output_dir from config)");

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic datasets to disk");
  gen->add_option("--config", config_path, "Config file")->required();
  gen->add_option("--out", out_dir, "Output directory (default: <output_dir>/data)");

  auto* check = app.add_subcommand("validate", "Validate a config file");
  check->add_option("--config", config_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report("usage", e.what());
  }

  try {
    tpfl::ExperimentConfig config = tpfl::load_config(config_path);
    if (*check) {
      std::cout << "ok\n";
      return 0;
    }
    if (*run) {
      if (seed_override) config.seeds = {*seed_override};
      const fs::path out = out_dir.empty() ? fs::path(config.output_dir) : fs::path(out_dir);
      const tpfl::ExperimentResult r = tpfl::run_experiment(config, out);
      print_summary(r);
      return r.summary.failed == 0 ? 0 : 3;
    }
    if (*ablate) {
      const tpfl::AblationAxis a = tpfl::parse_axis(axis);
      if (!out_dir.empty()) config.output_dir = out_dir;
      std::vector<tpfl::SweepPoint> points;
      std::size_t failed = 0;
      for (const tpfl::ExperimentConfig& c : tpfl::preset_ablation(a, config)) {
        const tpfl::ExperimentResult r = tpfl::run_experiment(c, fs::path(c.output_dir));
        failed += r.summary.failed;
        const auto p = tpfl::sweep_points(a, r);
        points.insert(points.end(), p.begin(), p.end());
        print_summary(r);
      }
      tpfl::emit_plotdata(points, fs::path(config.output_dir) / "plots");
      return failed == 0 ? 0 : 3;
    }
    if (*gen) {
      const fs::path out = out_dir.empty() ? fs::path(config.output_dir) / "data" : fs::path(out_dir);
      tpfl::generate_datasets(config, out);
      return 0;
    }
  } catch (const tpfl::ConfigError& e) {
    return report(e.kind(), e.what(), e.problems());
  } catch (const tpfl::Error& e) {
    return report(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report("internal", e.what());
  }
  return 0;
}
