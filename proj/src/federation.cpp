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

#include "tpfl/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#include "tpfl/error.hpp"

namespace tpfl {
namespace {

using namespace tpfl::ad;

void require_same_layout(const PromptPair& a, const PromptPair& b) {
  if (a.text.context.shape() != b.text.context.shape() ||
      a.visual.delta.shape() != b.visual.delta.shape()) {
    throw ShapeError("aggregate_prompts: prompt shapes differ: context " +
                     shape_string(a.text.context.shape()) + " vs " +
                     shape_string(b.text.context.shape()) + ", delta " +
                     shape_string(a.visual.delta.shape()) + " vs " +
                     shape_string(b.visual.delta.shape()));
  }
}

Batch slice_batch(const Batch& data, std::size_t begin, std::size_t end) {
  const std::size_t width = data.images.extent(1);
  Batch out{Tensor({end - begin, width}), {}};
  std::copy(data.images.data().begin() + static_cast<std::ptrdiff_t>(begin * width),
            data.images.data().begin() + static_cast<std::ptrdiff_t>(end * width),
            out.images.data().begin());
  out.labels.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    data.labels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

}  // namespace

std::string_view variant_name(ProtocolVariant v) {
  switch (v) {
    case ProtocolVariant::kLocalOnly: return "local_only";
    case ProtocolVariant::kPromptFL: return "promptfl_text_only";
    case ProtocolVariant::kTPFL: return "tpfl";
    case ProtocolVariant::kATPFL: return "atpfl";
  }
  return "atpfl";
}

ProtocolVariant parse_variant(std::string_view name) {
  if (name == "local_only") return ProtocolVariant::kLocalOnly;
  if (name == "promptfl_text_only") return ProtocolVariant::kPromptFL;
  if (name == "tpfl") return ProtocolVariant::kTPFL;
  if (name == "atpfl") return ProtocolVariant::kATPFL;
  throw DomainError("unknown protocol variant '" + std::string(name) + "'");
}

double FederationOptions::effective_mu() const {
  return variant == ProtocolVariant::kATPFL ? loss.mu : 0.0;
}

bool FederationOptions::visual_enabled() const {
  return visual_prompt && variant != ProtocolVariant::kPromptFL;
}

ClientResult client_update(ClientState& client, const GlobalPrompts& global,
                           const Backbone& backbone, const FederationOptions& opts,
                           std::size_t round, double lr) {
  const bool local_only = opts.variant == ProtocolVariant::kLocalOnly;
  client.previous = client.current;
  if (!local_only) client.current = global.prompts;
  // Local training contrasts against its own starting point, which makes the
  // augmentation gradient vanish.
  const PromptPair& reference = local_only ? client.previous : global.prompts;

  LossOptions loss_opts = opts.loss;
  loss_opts.mu = opts.effective_mu();
  const bool train_visual = opts.visual_enabled();

  const std::size_t n = client.data.labels.size();
  if (n == 0) throw DomainError("client " + std::to_string(client.id) + ": empty dataset");
  const std::size_t batch = opts.batch_size == 0 ? n : std::min(opts.batch_size, n);

  ClientResult result;
  result.client_id = client.id;
  result.sample_count = client.sample_count;
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < opts.local_epochs; ++epoch) {
    for (std::size_t begin = 0, b = 0; begin < n; begin += batch, ++b) {
      const Batch mb = batch == n ? client.data : slice_batch(client.data, begin, std::min(n, begin + batch));
      const PatchOffset offset = draw_patch_offset(client.current.visual, client.patch_rng);
      Graph g;
      Var context = g.parameter(client.current.text.context);
      Var delta = train_visual ? g.parameter(client.current.visual.delta)
                               : g.constant(client.current.visual.delta);
      const std::string where = "client " + std::to_string(client.id) + ", round " +
                                std::to_string(round) + ", epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(b);
      LossGraph lg;
      try {
        lg = build_total_loss(g, backbone, mb, context, delta, client.current, client.previous,
                              reference, loss_opts, offset);
      } catch (const NumericalError& e) {
        throw NumericalError(where + ": " + e.what());
      } catch (const DomainError& e) {
        throw NumericalError(where + ": " + e.what());
      }
      const LossBreakdown lb = breakdown(lg, loss_opts);
      if (!std::isfinite(lb.total)) throw NumericalError(where + ": non-finite loss");
      const Gradients grads = g.backward(lg.total);
      if (!grads[context].all_finite() || (train_visual && !grads[delta].all_finite())) {
        throw NumericalError(where + ": non-finite gradient");
      }
      client.optimizer.context.step(client.current.text.context, grads[context], lr);
      if (train_visual) {
        client.optimizer.delta.step(client.current.visual.delta, grads[delta], lr);
        project_to_mask(client.current.visual);
      }
      result.mean_loss.l_con += lb.l_con;
      result.mean_loss.l_aug_text += lb.l_aug_text;
      result.mean_loss.l_aug_visual += lb.l_aug_visual;
      result.mean_loss.total += lb.total;
      ++steps;
    }
  }
  if (steps > 0) {
    const double k = static_cast<double>(steps);
    result.mean_loss.l_con /= k;
    result.mean_loss.l_aug_text /= k;
    result.mean_loss.l_aug_visual /= k;
    result.mean_loss.total /= k;
  }
  result.mean_loss.mu = loss_opts.mu;
  result.mean_loss.gamma = loss_opts.gamma;
  result.prompts = client.current;
  return result;
}

PromptPair aggregate_prompts(std::span<const Contribution> contributions) {
  if (contributions.empty()) throw DomainError("aggregate_prompts: no contributions");
  std::vector<const Contribution*> sorted;
  sorted.reserve(contributions.size());
  for (const Contribution& c : contributions) sorted.push_back(&c);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Contribution* a, const Contribution* b) {
                     return a->client_id < b->client_id;
                   });
  double total = 0.0;
  for (const Contribution* c : sorted) {
    if (c->samples == 0) {
      throw DomainError("aggregate_prompts: client " + std::to_string(c->client_id) +
                        " contributed zero samples");
    }
    require_same_layout(sorted.front()->prompts, c->prompts);
    total += static_cast<double>(c->samples);
  }
  PromptPair out = sorted.front()->prompts;
  if (sorted.size() == 1) return out;
  Tensor& context = out.text.context;
  Tensor& delta = out.visual.delta;
  std::fill(context.data().begin(), context.data().end(), 0.0);
  std::fill(delta.data().begin(), delta.data().end(), 0.0);
  for (const Contribution* c : sorted) {
    const double w = static_cast<double>(c->samples) / total;
    const Tensor& ctx = c->prompts.text.context;
    const Tensor& dl = c->prompts.visual.delta;
    for (std::size_t i = 0; i < context.size(); ++i) context[i] += w * ctx[i];
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += w * dl[i];
  }
  return out;
}

std::vector<std::size_t> sample_clients(std::size_t clients, std::size_t per_round,
                                        std::size_t round, std::uint64_t seed) {
  if (per_round < 1 || per_round > clients) {
    throw DomainError("sample_clients: need 1 <= K <= M, got K=" + std::to_string(per_round) +
                      ", M=" + std::to_string(clients));
  }
  std::vector<std::size_t> ids(clients);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  if (per_round < clients) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(round)));
    // Partial Fisher-Yates: the first K slots end up a uniform K-subset.
    for (std::size_t i = 0; i < per_round; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, clients - 1);
      std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(per_round);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::uint32_t> nearest_class(const Tensor& z_text, const Tensor& z_vis) {
  if (z_text.rank() != 2 || z_vis.rank() != 2 || z_text.extent(1) != z_vis.extent(1)) {
    throw ShapeError("nearest_class: text " + shape_string(z_text.shape()) + " vs visual " +
                     shape_string(z_vis.shape()));
  }
  const std::size_t classes = z_text.extent(0), dim = z_text.extent(1);
  const std::size_t rows = z_vis.extent(0);
  std::vector<std::uint32_t> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += z_vis[i * dim + j] * z_text[c * dim + j];
      if (s > best) {
        best = s;
        arg = static_cast<std::uint32_t>(c);
      }
    }
    out[i] = arg;
  }
  return out;
}

std::vector<std::uint32_t> predict(const PromptPair& prompts, const Backbone& backbone,
                                   const Batch& batch) {
  Graph g;
  const Tensor z_text =
      encode_text_all(g, backbone.text_encoder, g.constant(prompts.text.context), prompts.text)
          .value();
  const Tensor z_vis = encode_images(g, g.constant(batch.images), g.constant(prompts.visual.delta),
                                     prompts.visual, PatchOffset{}, backbone.visual_encoder)
                           .value();
  return nearest_class(z_text, z_vis);
}

ClassificationMetrics evaluate(const PromptPair& prompts, const Backbone& backbone,
                               const Batch& test, EmptyClassF1 empty) {
  const std::vector<std::uint32_t> pred = predict(prompts, backbone, test);
  return classification_metrics(test.labels, pred, prompts.text.class_count(), empty);
}

std::vector<ClientState> make_clients(const FederationSetup& setup,
                                      const FederationOptions& opts) {
  const PartitionPlan& plan = *setup.plan;
  std::vector<ClientState> clients;
  clients.reserve(plan.clients());
  for (std::size_t i = 0; i < plan.clients(); ++i) {
    if (plan.assignments[i].empty()) {
      throw DomainError("client " + std::to_string(i) + ": empty dataset");
    }
    ClientState c;
    c.id = i;
    c.data = setup.train->gather(plan.assignments[i]);
    c.sample_count = plan.assignments[i].size();
    c.current = setup.initial;
    c.previous = setup.initial;
    c.optimizer.context = ParamOptimizer(opts.optimizer, setup.initial.text.context.shape());
    c.optimizer.delta = ParamOptimizer(opts.optimizer, setup.initial.visual.delta.shape());
    c.patch_rng = Rng(derive_seed(setup.patch_seed, static_cast<std::uint64_t>(i)));
    clients.push_back(std::move(c));
  }
  return clients;
}

RunArtifacts server_run(const FederationSetup& setup, const FederationOptions& opts) {
  if (!setup.backbone || !setup.train || !setup.plan || !setup.test) {
    throw DomainError("server_run: incomplete setup");
  }
  if (opts.clients_per_round > opts.clients || opts.clients_per_round == 0) {
    throw DomainError("server_run: need 1 <= K <= M, got K=" +
                      std::to_string(opts.clients_per_round) + ", M=" +
                      std::to_string(opts.clients));
  }
  if (setup.plan->clients() != opts.clients) {
    throw DomainError("server_run: partition has " + std::to_string(setup.plan->clients()) +
                      " clients, options say " + std::to_string(opts.clients));
  }
  const Backbone& backbone = *setup.backbone;
  const Batch test = setup.test->all();
  if (test.labels.empty()) throw DomainError("server_run: empty test set");

  std::vector<ClientState> clients = make_clients(setup, opts);
  RunArtifacts out;
  out.global = GlobalPrompts{setup.initial, 0};

  for (std::size_t t = 1; t <= opts.rounds; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = scheduled_lr(opts.alpha, opts.scheduler, t, opts.rounds);
    std::vector<std::size_t> ids =
        sample_clients(opts.clients, opts.clients_per_round, t, setup.sampling_seed);
    if (opts.reverse_dispatch) std::reverse(ids.begin(), ids.end());

    std::vector<ClientResult> results(ids.size());
    auto work = [&](std::size_t slot) {
      results[slot] = client_update(clients[ids[slot]], out.global, backbone, opts, t, lr);
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(opts.threads, ids.size()));
    if (threads == 1) {
      for (std::size_t s = 0; s < ids.size(); ++s) work(s);
    } else {
      std::vector<std::exception_ptr> errors(threads);
      {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < threads; ++w) {
          pool.emplace_back([&, w] {
            try {
              for (std::size_t s = w; s < ids.size(); s += threads) work(s);
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
        }
      }
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    std::sort(results.begin(), results.end(),
              [](const ClientResult& a, const ClientResult& b) { return a.client_id < b.client_id; });

    if (opts.variant != ProtocolVariant::kLocalOnly) {
      std::vector<Contribution> contributions;
      contributions.reserve(results.size());
      for (const ClientResult& r : results) {
        contributions.push_back(Contribution{r.client_id, r.sample_count, r.prompts});
      }
      out.global.prompts = aggregate_prompts(contributions);
    }
    out.global.round = t;

    RoundRecord rec;
    rec.seed = setup.run_seed;
    rec.round = t;
    for (const ClientResult& r : results) {
      rec.l_con += r.mean_loss.l_con;
      rec.l_aug_text += r.mean_loss.l_aug_text;
      rec.l_aug_visual += r.mean_loss.l_aug_visual;
    }
    const double k = static_cast<double>(results.size());
    rec.l_con /= k;
    rec.l_aug_text /= k;
    rec.l_aug_visual /= k;
    if (opts.variant == ProtocolVariant::kLocalOnly) {
      // No shared model: report the mean over every client's own prompts.
      for (const ClientState& c : clients) {
        const ClassificationMetrics m = evaluate(c.current, backbone, test, opts.empty_class_f1);
        rec.accuracy += m.accuracy;
        rec.macro_f1 += m.macro_f1;
      }
      rec.accuracy /= static_cast<double>(clients.size());
      rec.macro_f1 /= static_cast<double>(clients.size());
    } else {
      const ClassificationMetrics m =
          evaluate(out.global.prompts, backbone, test, opts.empty_class_f1);
      rec.accuracy = m.accuracy;
      rec.macro_f1 = m.macro_f1;
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                      .count();
    out.records.push_back(rec);
  }
  out.client_prompts.reserve(clients.size());
  for (const ClientState& c : clients) out.client_prompts.push_back(c.current);
  return out;
}

}  // namespace tpfl
