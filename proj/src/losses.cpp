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

#include "tpfl/losses.hpp"

#include <cmath>
#include <string>

#include "tpfl/error.hpp"

namespace tpfl {
namespace {

using namespace tpfl::ad;

void require_finite(const char* op, const Tensor& t) {
  if (!t.all_finite()) throw NumericalError(std::string(op) + ": non-finite input");
}

void require_gamma(const char* op, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw DomainError(std::string(op) + ": temperature must be positive and finite");
  }
}

Var as_rows(Var v) {
  if (v.shape().size() == 1) return reshape(v, {1, v.shape()[0]});
  return v;
}

// Selects column 0 of a [N, 2] log-probability table and returns minus its mean.
Var first_column_nll(Graph& g, Var log_probs) {
  const std::size_t n = log_probs.shape()[0];
  Tensor pick({n, 2});
  for (std::size_t i = 0; i < n; ++i) pick[i * 2] = 1.0;
  return scale(sum(mul_elem(log_probs, g.constant(std::move(pick)))),
               -1.0 / static_cast<double>(n));
}

}  // namespace

std::string_view text_aug_mode_name(TextAugMode mode) {
  return mode == TextAugMode::kPooled ? "pooled" : "per_class";
}

TextAugMode parse_text_aug_mode(std::string_view name) {
  if (name == "per_class") return TextAugMode::kPerClass;
  if (name == "pooled") return TextAugMode::kPooled;
  throw DomainError("unknown text augmentation mode '" + std::string(name) + "'");
}

Var clip_matching_loss(Var z_text, Var z_vis, std::span<const std::uint32_t> labels,
                       double gamma) {
  require_gamma("clip_matching_loss", gamma);
  require_finite("clip_matching_loss", z_text.value());
  require_finite("clip_matching_loss", z_vis.value());
  if (z_text.shape().size() != 2 || z_vis.shape().size() != 2 ||
      z_text.shape()[1] != z_vis.shape()[1]) {
    throw ShapeError("clip_matching_loss: text " + shape_string(z_text.shape()) + " vs visual " +
                     shape_string(z_vis.shape()));
  }
  const std::size_t classes = z_text.shape()[0];
  const std::size_t batch = z_vis.shape()[0];
  if (labels.size() != batch || batch == 0) {
    throw ShapeError("clip_matching_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(batch) + " embeddings");
  }
  Tensor onehot({batch, classes});
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] >= classes) {
      throw DomainError("clip_matching_loss: label " + std::to_string(labels[i]) +
                        " out of range for " + std::to_string(classes) + " classes");
    }
    onehot[i * classes + labels[i]] = 1.0;
  }
  Graph& g = z_text.graph();
  Var logits = scale(matmul(z_vis, transpose(z_text)), 1.0 / gamma);
  Var picked = sum(mul_elem(log_softmax(logits, 1), g.constant(std::move(onehot))));
  return scale(picked, -1.0 / static_cast<double>(batch));
}

double clip_matching_loss(const Tensor& z_text, const Tensor& z_vis,
                          std::span<const std::uint32_t> labels, double gamma) {
  Graph g;
  return clip_matching_loss(g.constant(z_text), g.constant(z_vis), labels, gamma).value().item();
}

Var infonce_augmented_loss(Var z_new, Var z_global, Var z_prev, double gamma) {
  require_gamma("infonce_augmented_loss", gamma);
  require_finite("infonce_augmented_loss", z_new.value());
  require_finite("infonce_augmented_loss", z_global.value());
  require_finite("infonce_augmented_loss", z_prev.value());
  if (z_new.shape() != z_global.shape() || z_new.shape() != z_prev.shape()) {
    throw ShapeError("infonce_augmented_loss: shapes " + shape_string(z_new.shape()) + ", " +
                     shape_string(z_global.shape()) + ", " + shape_string(z_prev.shape()));
  }
  Graph& g = z_new.graph();
  Var anchor = as_rows(z_new);
  Var positive = detach(as_rows(z_global));
  Var negative = detach(as_rows(z_prev));
  const std::size_t n = anchor.shape()[0];
  Var s_pos = reshape(dot_rows(anchor, positive), {n, 1});
  Var s_neg = reshape(dot_rows(anchor, negative), {n, 1});
  const Var pair[] = {s_pos, s_neg};
  Var logits = scale(concat(pair, 1), 1.0 / gamma);
  return first_column_nll(g, log_softmax(logits, 1));
}

double infonce_augmented_loss(const Tensor& z_new, const Tensor& z_global, const Tensor& z_prev,
                              double gamma) {
  Graph g;
  return infonce_augmented_loss(g.constant(z_new), g.constant(z_global), g.constant(z_prev), gamma)
      .value()
      .item();
}

LossGraph build_total_loss(Graph& g, const Backbone& backbone, const Batch& batch, Var context,
                           Var delta, const PromptPair& layout, const PromptPair& previous,
                           const PromptPair& global, const LossOptions& opts,
                           PatchOffset offset) {
  if (!(opts.mu >= 0.0)) throw DomainError("total_loss: mu must be non-negative");
  const FrozenEncoder& text_enc = backbone.text_encoder;
  const FrozenEncoder& vis_enc = backbone.visual_encoder;
  const VisualPrompt& vp = layout.visual;

  // Matching term on the batch.
  Var z_text = encode_text_all(g, text_enc, context, layout.text);
  Var z_vis = encode_images(g, g.constant(batch.images), delta, vp, offset, vis_enc);
  Var l_con = clip_matching_loss(z_text, z_vis, batch.labels, opts.gamma);

  // Textual contrast against frozen global / previous prompts.
  Var z_text_global = encode_text_all(g, text_enc, g.constant(global.text.context), layout.text);
  Var z_text_prev = encode_text_all(g, text_enc, g.constant(previous.text.context), layout.text);
  Var l_aug_text;
  if (opts.text_aug == TextAugMode::kPerClass) {
    l_aug_text = infonce_augmented_loss(z_text, z_text_global, z_text_prev, opts.gamma);
  } else {
    auto pooled = [](Var z) { return l2_normalize(sum(z, 0), 0); };
    l_aug_text = infonce_augmented_loss(pooled(z_text), pooled(z_text_global),
                                        pooled(z_text_prev), opts.gamma);
  }

  // Visual contrast on the batch-mean image under the three prompts.
  const std::size_t rows = batch.images.extent(0);
  Tensor mean_image(vp.delta.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < mean_image.size(); ++j)
      mean_image[j] += batch.images[r * mean_image.size() + j];
  for (double& v : mean_image.data()) v /= static_cast<double>(rows);
  Var mean_var = g.constant(std::move(mean_image));
  auto encode_with = [&](Var d) {
    return encode_image(g, apply_visual_prompt(g, mean_var, d, vp, offset), vis_enc);
  };
  Var l_aug_visual = infonce_augmented_loss(encode_with(delta),
                                            encode_with(g.constant(global.visual.delta)),
                                            encode_with(g.constant(previous.visual.delta)),
                                            opts.gamma);

  Var total = add(l_con, scale(add(l_aug_text, l_aug_visual), opts.mu));
  return LossGraph{l_con, l_aug_text, l_aug_visual, total};
}

LossBreakdown breakdown(const LossGraph& graph, const LossOptions& opts) {
  return LossBreakdown{graph.l_con.value().item(), graph.l_aug_text.value().item(),
                       graph.l_aug_visual.value().item(), graph.total.value().item(), opts.mu,
                       opts.gamma};
}

LossBreakdown total_loss(const Backbone& backbone, const Batch& batch, const PromptPair& current,
                         const PromptPair& previous, const PromptPair& global,
                         const LossOptions& opts, PatchOffset offset) {
  Graph g;
  LossGraph lg = build_total_loss(g, backbone, batch, g.constant(current.text.context),
                                  g.constant(current.visual.delta), current, previous, global,
                                  opts, offset);
  return breakdown(lg, opts);
}

}  // namespace tpfl
