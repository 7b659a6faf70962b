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

#include "tpfl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "tpfl/error.hpp"

namespace tpfl {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(std::string_view v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw DomainError("expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t parse_u64(std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw DomainError("expected an unsigned integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw DomainError("expected a finite real number, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw DomainError("expected true/false, got '" + std::string(v) + "'");
}

std::vector<std::uint64_t> parse_seeds(std::string_view v) {
  std::vector<std::uint64_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_u64(trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

struct Key {
  const char* name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define TPFL_SIZE_KEY(field) \
  Key { #field, [](const ExperimentConfig& c) { return std::to_string(c.field); }, \
        [](ExperimentConfig& c, std::string_view v) { c.field = parse_size(v); } }
#define TPFL_REAL_KEY(field) \
  Key { #field, [](const ExperimentConfig& c) { return format_double(c.field); }, \
        [](ExperimentConfig& c, std::string_view v) { c.field = parse_real(v); } }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"variant", [](const ExperimentConfig& c) { return std::string(variant_name(c.variant)); },
          [](ExperimentConfig& c, std::string_view v) { c.variant = parse_variant(v); }},
      TPFL_SIZE_KEY(clients),
      TPFL_SIZE_KEY(clients_per_round),
      TPFL_SIZE_KEY(rounds),
      TPFL_SIZE_KEY(local_epochs),
      TPFL_SIZE_KEY(batch_size),
      TPFL_REAL_KEY(alpha),
      Key{"optimizer",
          [](const ExperimentConfig& c) { return std::string(optimizer_name(c.optimizer)); },
          [](ExperimentConfig& c, std::string_view v) { c.optimizer = parse_optimizer(v); }},
      Key{"scheduler",
          [](const ExperimentConfig& c) { return std::string(scheduler_name(c.scheduler)); },
          [](ExperimentConfig& c, std::string_view v) { c.scheduler = parse_scheduler(v); }},
      TPFL_REAL_KEY(mu),
      TPFL_REAL_KEY(gamma),
      Key{"text_aug",
          [](const ExperimentConfig& c) { return std::string(text_aug_mode_name(c.text_aug)); },
          [](ExperimentConfig& c, std::string_view v) { c.text_aug = parse_text_aug_mode(v); }},
      TPFL_SIZE_KEY(context_length),
      Key{"class_position",
          [](const ExperimentConfig& c) {
            return c.class_position ? std::to_string(*c.class_position) : std::string("end");
          },
          [](ExperimentConfig& c, std::string_view v) {
            if (v == "end") {
              c.class_position.reset();
            } else {
              c.class_position = parse_size(v);
            }
          }},
      TPFL_SIZE_KEY(token_dim),
      TPFL_SIZE_KEY(embed_dim),
      TPFL_SIZE_KEY(text_hidden),
      TPFL_SIZE_KEY(visual_hidden),
      Key{"template",
          [](const ExperimentConfig& c) { return std::string(template_name(c.visual_template)); },
          [](ExperimentConfig& c, std::string_view v) { c.visual_template = parse_template(v); }},
      TPFL_SIZE_KEY(template_size),
      Key{"visual_prompt",
          [](const ExperimentConfig& c) { return std::string(c.visual_prompt ? "true" : "false"); },
          [](ExperimentConfig& c, std::string_view v) { c.visual_prompt = parse_bool(v); }},
      TPFL_REAL_KEY(prompt_init_std),
      TPFL_SIZE_KEY(classes),
      TPFL_SIZE_KEY(shots),
      TPFL_SIZE_KEY(classes_per_client),
      TPFL_SIZE_KEY(height),
      TPFL_SIZE_KEY(width),
      TPFL_SIZE_KEY(channels),
      TPFL_REAL_KEY(noise_sigma),
      TPFL_SIZE_KEY(train_per_class),
      TPFL_SIZE_KEY(test_per_class),
      Key{"empty_class_f1",
          [](const ExperimentConfig& c) { return std::string(empty_class_f1_name(c.empty_class_f1)); },
          [](ExperimentConfig& c, std::string_view v) { c.empty_class_f1 = parse_empty_class_f1(v); }},
      Key{"seeds",
          [](const ExperimentConfig& c) {
            std::string out;
            for (std::size_t i = 0; i < c.seeds.size(); ++i) {
              if (i > 0) out += ",";
              out += std::to_string(c.seeds[i]);
            }
            return out;
          },
          [](ExperimentConfig& c, std::string_view v) { c.seeds = parse_seeds(v); }},
      TPFL_SIZE_KEY(threads),
      Key{"output_dir", [](const ExperimentConfig& c) { return c.output_dir; },
          [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); }},
      Key{"data_dir", [](const ExperimentConfig& c) { return c.data_dir; },
          [](ExperimentConfig& c, std::string_view v) { c.data_dir = std::string(v); }},
  };
  return table;
}

#undef TPFL_SIZE_KEY
#undef TPFL_REAL_KEY

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::size_t ExperimentConfig::resolved_train_per_class() const {
  if (train_per_class > 0) return train_per_class;
  return std::max<std::size_t>(1, required_per_class(classes, clients, classes_per_client, shots));
}

BackboneSpec ExperimentConfig::backbone_spec() const {
  return BackboneSpec{classes,     context_length, token_dim, embed_dim, text_hidden,
                      visual_hidden, height,       width,     channels};
}

SyntheticSpec ExperimentConfig::train_spec() const {
  return SyntheticSpec{classes, resolved_train_per_class(), height, width, channels, noise_sigma};
}

SyntheticSpec ExperimentConfig::test_spec() const {
  return SyntheticSpec{classes, test_per_class, height, width, channels, noise_sigma};
}

FederationOptions ExperimentConfig::federation_options() const {
  FederationOptions o;
  o.variant = variant;
  o.clients = clients;
  o.clients_per_round = clients_per_round;
  o.rounds = rounds;
  o.local_epochs = local_epochs;
  o.batch_size = batch_size;
  o.alpha = alpha;
  o.optimizer = optimizer;
  o.scheduler = scheduler;
  o.loss = LossOptions{mu, gamma, text_aug};
  o.visual_prompt = visual_prompt;
  o.empty_class_f1 = empty_class_f1;
  o.threads = threads;
  return o;
}

std::vector<std::string> validation_problems(const ExperimentConfig& c) {
  std::vector<std::string> p;
  auto check = [&p](bool ok, std::string msg) {
    if (!ok) p.push_back(std::move(msg));
  };
  check(c.clients >= 1, "clients must be >= 1");
  check(c.clients_per_round >= 1, "clients_per_round must be >= 1");
  check(c.clients_per_round <= c.clients, "clients_per_round (K=" +
                                              std::to_string(c.clients_per_round) +
                                              ") must not exceed clients (M=" +
                                              std::to_string(c.clients) + ")");
  check(c.local_epochs >= 1, "local_epochs must be >= 1");
  check(c.alpha >= 0.0, "alpha must be >= 0");
  check(c.mu >= 0.0, "mu must be >= 0");
  check(c.gamma > 0.0, "gamma must be > 0");
  check(c.context_length >= 1 && c.context_length <= kMaxContextLength,
        "context_length must be in [1, 64]");
  check(c.resolved_class_position() <= c.context_length,
        "class_position (" + std::to_string(c.resolved_class_position()) +
            ") must not exceed context_length (" + std::to_string(c.context_length) + ")");
  check(c.token_dim >= 1, "token_dim must be >= 1");
  check(c.embed_dim >= 1, "embed_dim must be >= 1");
  check(c.text_hidden >= 1, "text_hidden must be >= 1");
  check(c.visual_hidden >= 1, "visual_hidden must be >= 1");
  check(c.classes >= 2, "classes must be >= 2");
  check(c.shots >= 1, "shots must be >= 1");
  check(c.classes_per_client >= 1, "classes_per_client must be >= 1");
  check(c.classes_per_client <= c.classes, "classes_per_client (s=" +
                                               std::to_string(c.classes_per_client) +
                                               ") must not exceed classes (C=" +
                                               std::to_string(c.classes) + ")");
  check(c.height >= 1 && c.width >= 1 && c.channels >= 1, "image extents must be >= 1");
  check(c.noise_sigma >= 0.0, "noise_sigma must be >= 0");
  check(c.prompt_init_std >= 0.0, "prompt_init_std must be >= 0");
  check(c.test_per_class >= 1, "test_per_class must be >= 1");
  if (c.train_per_class > 0) {
    const std::size_t need =
        required_per_class(c.classes, c.clients, c.classes_per_client, c.shots);
    check(c.train_per_class >= need, "train_per_class (" + std::to_string(c.train_per_class) +
                                         ") is below the " + std::to_string(need) +
                                         " samples per class the partition needs");
  }
  check(c.template_size >= 1, "template_size must be >= 1");
  if (c.visual_template == VisualTemplate::kPadding) {
    check(2 * c.template_size <= std::min(c.height, c.width),
          "padding template_size too large for the image");
  } else {
    check(c.template_size <= std::min(c.height, c.width),
          "patch template_size larger than the image");
  }
  check(!c.seeds.empty(), "seeds must list at least one seed");
  check(c.threads >= 1, "threads must be >= 1");
  return p;
}

void validate(const ExperimentConfig& config) {
  auto problems = validation_problems(config);
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::vector<std::string> problems;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) {
      problems.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Key& k) { return key == k.name; });
    if (it == table.end()) {
      problems.push_back(where + "unknown key '" + std::string(key) + "'");
      continue;
    }
    if (auto [pos, inserted] = seen.emplace(std::string(key), line_no); !inserted) {
      problems.push_back(where + "duplicate key '" + std::string(key) + "' (first on line " +
                         std::to_string(pos->second) + ")");
      continue;
    }
    try {
      it->set(c, value);
    } catch (const Error& e) {
      problems.push_back(where + std::string(key) + ": " + e.what());
    }
  }
  for (auto& p : validation_problems(c)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const Key& k : keys()) {
    out += k.name;
    out += " = ";
    out += k.get(config);
    out += "\n";
  }
  return out;
}

}  // namespace tpfl
