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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Registered with ctest as `acceptance`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "test_util.hpp"
#include "tpfl/error.hpp"
#include "tpfl/experiment.hpp"
#include "tpfl/fd.hpp"

namespace tpfl {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using testing::random_tensor;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// 1. Gradients of the matching loss, both contrastive terms and the total
// objective against central differences.
Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, "acceptance-fd"));
    BackboneSpec spec;
    spec.classes = testing::uniform_size(rng, 2, 6);
    spec.context_length = testing::uniform_size(rng, 1, 4);
    spec.token_dim = testing::uniform_size(rng, 2, 6);
    spec.embed_dim = testing::uniform_size(rng, 3, 8);
    spec.text_hidden = testing::uniform_size(rng, 4, 10);
    spec.visual_hidden = testing::uniform_size(rng, 4, 10);
    spec.height = testing::uniform_size(rng, 4, 7);
    spec.width = testing::uniform_size(rng, 4, 7);
    spec.channels = testing::uniform_size(rng, 1, 2);
    const Backbone backbone = make_backbone(spec, seed);
    const auto kind = static_cast<VisualTemplate>(seed % 3);
    const std::size_t position = testing::uniform_size(rng, 0, spec.context_length);
    const std::size_t tsize = kind == VisualTemplate::kPadding ? 1 : testing::uniform_size(rng, 1, 3);
    auto prompts = [&] {
      PromptPair p{make_text_prompt(random_tensor({spec.context_length, spec.token_dim}, rng, 0.5),
                                    position, backbone.class_embeddings),
                   make_visual_prompt(kind, tsize, spec.height, spec.width, spec.channels)};
      p.visual.delta = random_tensor({spec.height, spec.width, spec.channels}, rng, 0.3);
      project_to_mask(p.visual);
      return p;
    };
    const PromptPair cur = prompts(), prev = prompts(), glob = prompts();
    const std::size_t n = testing::uniform_size(rng, 1, 6);
    Batch batch{random_tensor({n, spec.height * spec.width * spec.channels}, rng), {}};
    for (std::size_t i = 0; i < n; ++i)
      batch.labels.push_back(static_cast<std::uint32_t>(rng() % spec.classes));
    const LossOptions opts{testing::uniform_tensor({1}, rng, 0.1, 2.0)[0],
                           testing::uniform_tensor({1}, rng, 0.07, 0.5)[0],
                           seed % 2 ? TextAugMode::kPooled : TextAugMode::kPerClass};
    const PatchOffset offset = draw_patch_offset(cur.visual, rng);

    Graph g;
    Var ctx = g.parameter(cur.text.context), delta = g.parameter(cur.visual.delta);
    const LossGraph lg = build_total_loss(g, backbone, batch, ctx, delta, cur, prev, glob, opts, offset);
    const std::vector<Tensor> params{cur.text.context, cur.visual.delta};
    const std::vector<std::pair<Var, double LossBreakdown::*>> terms{
        {lg.l_con, &LossBreakdown::l_con},
        {lg.l_aug_text, &LossBreakdown::l_aug_text},
        {lg.l_aug_visual, &LossBreakdown::l_aug_visual},
        {lg.total, &LossBreakdown::total}};
    for (const auto& [var, field] : terms) {
      const auto grads = g.backward(var);
      const auto num = ad::fd_gradient(
          [&, field = field](std::span<const Tensor> p) {
            PromptPair q = cur;
            q.text.context = p[0];
            q.visual.delta = p[1];
            return total_loss(backbone, batch, q, prev, glob, opts, offset).*field;
          },
          params, 1e-4);
      worst = std::max({worst, ad::max_relative_error(grads[ctx], num[0]),
                        ad::max_relative_error(grads[delta], num[1])});
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && secs < 30.0,
          fmt("worst relative error %.3g (limit 1e-05), %.1f s (limit 30 s)", worst, secs)};
}

// 2. Weighted average against a brute force written independently here.
Outcome aggregation_oracle() {
  double worst = 0.0;
  bool permutation_ok = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(seed, "acceptance-agg"));
    const std::size_t k = testing::uniform_size(rng, 1, 10);
    const std::size_t l = testing::uniform_size(rng, 1, 4), d = testing::uniform_size(rng, 1, 6);
    const auto emb = std::make_shared<const Tensor>(random_tensor({2, d}, rng));
    std::vector<Contribution> list;
    for (std::size_t i = 0; i < k; ++i) {
      PromptPair p{make_text_prompt(random_tensor({l, d}, rng), 0, emb),
                   make_visual_prompt(VisualTemplate::kPadding, 1, 4, 4, 1)};
      p.visual.delta = random_tensor({4, 4, 1}, rng);
      list.push_back({i * 3 + 1, testing::uniform_size(rng, 1, 100), p});
    }
    const PromptPair agg = aggregate_prompts(list);
    double total = 0;
    for (const auto& c : list) total += static_cast<double>(c.samples);
    auto check = [&](const Tensor& got, auto pick) {
      for (std::size_t j = 0; j < got.size(); ++j) {
        long double num = 0;
        for (const auto& c : list) num += static_cast<long double>(c.samples) * pick(c)[j];
        worst = std::max(worst, std::abs(got[j] - static_cast<double>(num / total)));
      }
    };
    check(agg.text.context, [](const Contribution& c) -> const Tensor& { return c.prompts.text.context; });
    check(agg.visual.delta, [](const Contribution& c) -> const Tensor& { return c.prompts.visual.delta; });
    std::shuffle(list.begin(), list.end(), rng);
    const PromptPair again = aggregate_prompts(list);
    permutation_ok = permutation_ok && again.text.context == agg.text.context &&
                     again.visual.delta == agg.visual.delta;
  }
  return {worst <= 1e-12 && permutation_ok,
          fmt("max deviation %.3g (limit 1e-12), permutation invariant: ", worst) +
              (permutation_ok ? "yes" : "no")};
}

// 3. Closed-form loss values.
Outcome closed_forms() {
  double worst_c = 0.0, worst_2 = 0.0, worst_grad = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, "acceptance-closed"));
    const std::size_t c = testing::uniform_size(rng, 2, 20), d = testing::uniform_size(rng, 2, 16);
    const std::size_t b = testing::uniform_size(rng, 1, 8);
    Tensor row = random_tensor({d}, rng);
    Tensor zt({c, d});
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < d; ++j) zt[i * d + j] = row[j];
    const Tensor zv = random_tensor({b, d}, rng);
    std::vector<std::uint32_t> y;
    for (std::size_t i = 0; i < b; ++i) y.push_back(static_cast<std::uint32_t>(rng() % c));
    worst_c = std::max(worst_c, std::abs(clip_matching_loss(zt, zv, y, 0.07) - std::log(double(c))));

    Graph g;
    Var z = g.parameter(random_tensor({d}, rng));
    const Tensor w = random_tensor({d}, rng);
    Var l = infonce_augmented_loss(z, g.constant(w), g.constant(w), 0.07);
    worst_2 = std::max(worst_2, std::abs(l.value()[0] - std::log(2.0)));
    const auto grads = g.backward(l);
    for (double v : grads[z].data()) worst_grad = std::max(worst_grad, std::abs(v));
  }
  return {worst_c <= 1e-9 && worst_2 <= 1e-9 && worst_grad == 0.0,
          fmt("|L-ln C| %.3g, |L-ln 2| %.3g (limit 1e-09), max |grad| %.3g", worst_c, worst_2,
              worst_grad)};
}

bool same_records(const SeedRun& a, const SeedRun& b) {
  if (a.failed || b.failed || a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const RoundRecord &x = a.records[i], &y = b.records[i];
    if (x.accuracy != y.accuracy || x.macro_f1 != y.macro_f1 || x.l_con != y.l_con) return false;
  }
  return true;
}

bool same_prompts(const PromptPair& a, const PromptPair& b) {
  return fingerprint(a.text.context) == fingerprint(b.text.context) &&
         fingerprint(a.visual.delta) == fingerprint(b.visual.delta);
}

struct Audit {
  std::size_t runs = 0;
  std::size_t changed = 0;
  void add(const SeedRun& r) {
    ++runs;
    if (r.backbone_hash_before != r.backbone_hash_after) ++changed;
  }
  void add(const ExperimentResult& e) {
    for (const auto& r : e.runs) add(r);
  }
};

// 4. Reduction identities on the default task, seed 1.
Outcome reduction_identities(Audit& audit) {
  ExperimentConfig base;
  base.seeds = {1};
  auto run = [&](ExperimentConfig c) {
    const SeedRun r = run_seed(c, 1);
    audit.add(r);
    return r;
  };
  ExperimentConfig atpfl0 = base, tpfl = base, tpfl_novis = base, promptfl = base;
  atpfl0.variant = ProtocolVariant::kATPFL;
  atpfl0.mu = 0.0;
  tpfl.variant = ProtocolVariant::kTPFL;
  tpfl_novis.variant = ProtocolVariant::kTPFL;
  tpfl_novis.visual_prompt = false;
  promptfl.variant = ProtocolVariant::kPromptFL;
  const SeedRun a = run(atpfl0), t = run(tpfl), tn = run(tpfl_novis), p = run(promptfl);
  const bool id1 = same_records(a, t) && same_prompts(a.artifacts.global.prompts, t.artifacts.global.prompts);
  const bool id2 = same_records(tn, p) && same_prompts(tn.artifacts.global.prompts, p.artifacts.global.prompts);

  ExperimentConfig single = base;
  single.clients = single.clients_per_round = 1;
  single.classes_per_client = single.classes;
  single.variant = ProtocolVariant::kTPFL;
  ExperimentConfig local = single;
  local.variant = ProtocolVariant::kLocalOnly;
  const SeedRun f = run(single), lo = run(local);
  const bool id3 = same_records(f, lo) && lo.artifacts.client_prompts.size() == 1 &&
                   same_prompts(f.artifacts.global.prompts, lo.artifacts.client_prompts[0]);
  auto yn = [](bool b) { return b ? std::string("identical") : std::string("DIFFER"); };
  return {id1 && id2 && id3, "ATPFL(mu=0) vs TPFL " + yn(id1) + "; TPFL(no visual) vs PromptFL " +
                                 yn(id2) + "; M=1 federation vs local " + yn(id3)};
}

struct VariantResults {
  std::vector<std::pair<ProtocolVariant, Summary>> summaries;
  double seconds = 0.0;
};

// 6. The default task for all four protocols.
VariantResults run_variants(Audit& audit) {
  VariantResults out;
  const auto t0 = Clock::now();
  for (auto v : {ProtocolVariant::kLocalOnly, ProtocolVariant::kPromptFL, ProtocolVariant::kTPFL,
                 ProtocolVariant::kATPFL}) {
    ExperimentConfig c;
    c.variant = v;
    const ExperimentResult r = run_experiment(c);
    audit.add(r);
    out.summaries.emplace_back(v, r.summary);
  }
  out.seconds = seconds_since(t0);
  return out;
}

Outcome directional(const VariantResults& r) {
  const double local = r.summaries[0].second.accuracy_mean;
  const double promptfl = r.summaries[1].second.accuracy_mean;
  const double tpfl = r.summaries[2].second.accuracy_mean;
  const double atpfl = r.summaries[3].second.accuracy_mean;
  std::size_t failed = 0;
  for (const auto& [v, s] : r.summaries) failed += s.failed;
  const bool order = atpfl >= tpfl && tpfl >= promptfl && promptfl >= local;
  const double margin = 100.0 * (atpfl - local);
  return {order && margin >= 5.0 && failed == 0 && r.seconds < 600.0,
          fmt("accuracy local %.4f, promptfl %.4f, tpfl %.4f, atpfl %.4f; ", local, promptfl, tpfl,
              atpfl) +
              fmt("ATPFL-local %.2f pp (limit 5), %.1f s for 20 runs", margin, r.seconds)};
}

Summary run_default_with(const std::function<void(ExperimentConfig&)>& edit, Audit& audit) {
  ExperimentConfig c;
  edit(c);
  const ExperimentResult r = run_experiment(c);
  audit.add(r);
  return r.summary;
}

// 7. More shots per class should help.
Outcome shot_trend(Audit& audit) {
  const Summary one = run_default_with([](ExperimentConfig& c) { c.shots = 1; }, audit);
  const Summary sixteen = run_default_with([](ExperimentConfig& c) { c.shots = 16; }, audit);
  return {one.failed == 0 && sixteen.failed == 0 && sixteen.f1_mean > one.f1_mean,
          fmt("macro-F1 n_k=1 %.4f, n_k=16 %.4f", one.f1_mean, sixteen.f1_mean)};
}

// 8. More clients should not help.
Outcome client_trend(Audit& audit) {
  const Summary ten = run_default_with([](ExperimentConfig& c) { c.clients = c.clients_per_round = 10; }, audit);
  const Summary hundred =
      run_default_with([](ExperimentConfig& c) { c.clients = c.clients_per_round = 100; }, audit);
  return {ten.failed == 0 && hundred.failed == 0 && hundred.accuracy_mean <= ten.accuracy_mean,
          fmt("accuracy M=10 %.4f, M=100 %.4f", ten.accuracy_mean, hundred.accuracy_mean)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. Same config and seed, same bytes.
Outcome determinism() {
  ExperimentConfig c;
  c.seeds = {3};
  const fs::path a = testing::scratch_dir("accept_det_a"), b = testing::scratch_dir("accept_det_b");
  run_experiment(c, a);
  run_experiment(c, b);
  const std::string x = slurp(a / "metrics.csv"), y = slurp(b / "metrics.csv");
  return {!x.empty() && x == y, "metrics.csv " + std::to_string(x.size()) + " bytes, " +
                                    (x == y ? "byte-identical" : "DIFFERENT")};
}

// 10. Lossless round trip; every corruption is a DataFormatError.
Outcome dataset_format() {
  const fs::path dir = testing::scratch_dir("accept_io");
  ExperimentConfig c;
  Dataset ds = generate_synthetic(5, c.train_spec(), Split::kTrain);
  ds.images[0] = -0.0;
  ds.images[1] = std::numeric_limits<double>::denorm_min();
  ds.images[2] = std::nextafter(1.0, 2.0);
  save_dataset(ds, dir);
  const Dataset back = load_dataset(dir);
  const bool lossless = back == ds && fingerprint(back.images) == fingerprint(ds.images);

  const std::string manifest = slurp(dir / "manifest.json");
  std::size_t cases = 0, structured = 0, accepted = 0, other = 0;
  std::string first_other;
  auto attempt = [&] {
    ++cases;
    try {
      load_dataset(dir);
      ++accepted;
    } catch (const DataFormatError&) {
      ++structured;
    } catch (const std::exception& e) {
      if (other++ == 0) first_other = e.what();
    }
  };
  auto with_manifest = [&](const std::string& text) {
    std::ofstream(dir / "manifest.json", std::ios::binary | std::ios::trunc) << text;
    attempt();
  };
  Rng rng(derive_seed(10, "acceptance-corrupt"));
  for (std::size_t cut = 0; cut < manifest.size(); cut += 3) with_manifest(manifest.substr(0, cut));
  const std::string junk = "{}[]\":,-0123456789eE.xyz\x01\xff";
  for (int i = 0; i < 300; ++i) {
    std::string m = manifest;
    const std::size_t edits = testing::uniform_size(rng, 1, 3);
    for (std::size_t e = 0; e < edits; ++e) m[rng() % m.size()] = junk[rng() % junk.size()];
    if (m != manifest) with_manifest(m);
  }
  for (const char* bad :
       {R"({"version":1})", R"([1,2,3])", R"({"version":1,"shape":[1,2],"class_count":1})",
        R"({"version":-1})", R"({"version":1.5})", "null", ""}) {
    with_manifest(bad);
  }
  // Blob damage under an intact manifest must always be rejected.
  with_manifest(manifest);
  const std::size_t before = structured;
  fs::resize_file(dir / "images.f64", 24);
  attempt();
  save_dataset(ds, dir);
  fs::resize_file(dir / "labels.u32", 4);
  attempt();
  const bool blobs_rejected = structured == before + 2;
  // Edits that leave valid JSON with plausible values (a digit of the seed,
  // say) load successfully; they are counted, not failed.
  return {lossless && other == 0 && blobs_rejected,
          std::string("round trip ") + (lossless ? "bitwise lossless" : "LOSSY") + "; " +
              std::to_string(cases) + " corrupted inputs: " + std::to_string(structured) +
              " DataFormatError, " + std::to_string(accepted) + " still valid, " +
              std::to_string(other) + " other exceptions" +
              (first_other.empty() ? "" : " (first: " + first_other + ")")};
}

}  // namespace
}  // namespace tpfl

// With arguments, runs only the listed criterion numbers.
int main(int argc, char** argv) {
  using namespace tpfl;
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto selected = [&](int id) {
    return only.empty() || std::find(only.begin(), only.end(), id) != only.end();
  };
  spdlog::set_level(spdlog::level::warn);
  const auto t0 = Clock::now();
  int failures = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  auto guarded = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    if (!selected(id)) return;
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("threw: ") + e.what()});
    }
  };

  Audit audit;
  VariantResults variants;
  guarded(1, "gradient correctness", gradient_correctness);
  guarded(2, "aggregation oracle", aggregation_oracle);
  guarded(3, "closed forms", closed_forms);
  guarded(4, "reduction identities", [&] { return reduction_identities(audit); });
  guarded(6, "directional result", [&] {
    variants = run_variants(audit);
    return directional(variants);
  });
  guarded(7, "shot-size trend", [&] { return shot_trend(audit); });
  guarded(8, "client-volume trend", [&] { return client_trend(audit); });
  guarded(9, "determinism", determinism);
  guarded(10, "dataset format", dataset_format);
  if (selected(5)) {
    report(5, "frozen backbone",
           {audit.runs > 0 && audit.changed == 0,
            std::to_string(audit.runs) + " runs audited, " + std::to_string(audit.changed) +
                " with a changed encoder or class-embedding hash"});
  }
  const double secs = seconds_since(t0);
  std::printf("acceptance: %d failing, %.1f s total\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
