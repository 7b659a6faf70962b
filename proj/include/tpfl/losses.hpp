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

#ifndef TPFL_LOSSES_HPP_
#define TPFL_LOSSES_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tpfl/encoders.hpp"
#include "tpfl/graph.hpp"

namespace tpfl {

struct LossBreakdown {
  double l_con = 0.0;
  double l_aug_text = 0.0;
  double l_aug_visual = 0.0;
  double total = 0.0;
  double mu = 0.0;
  double gamma = 0.0;
};

// How the textual contrast pools over classes: one InfoNCE term per class
// averaged, or a single term on the normalized mean class embedding.
enum class TextAugMode { kPerClass, kPooled };

std::string_view text_aug_mode_name(TextAugMode mode);
TextAugMode parse_text_aug_mode(std::string_view name);

struct LossOptions {
  double mu = 1.0;
  double gamma = 0.07;
  TextAugMode text_aug = TextAugMode::kPerClass;
};

// Mean over the batch of -log softmax_j(<z_vis_i, z_text_j> / gamma) at the
// true label. z_text: [C, D], z_vis: [B, D].
Var clip_matching_loss(Var z_text, Var z_vis, std::span<const std::uint32_t> labels,
                       double gamma);
double clip_matching_loss(const Tensor& z_text, const Tensor& z_vis,
                          std::span<const std::uint32_t> labels, double gamma);

// -log(e^{s_g/gamma} / (e^{s_g/gamma} + e^{s_p/gamma})) with s_g = <z_new, z_global>
// and s_p = <z_new, z_prev>. Gradient flows into z_new only. Inputs are [D],
// or [N, D] in which case the N row losses are averaged.
Var infonce_augmented_loss(Var z_new, Var z_global, Var z_prev, double gamma);
double infonce_augmented_loss(const Tensor& z_new, const Tensor& z_global, const Tensor& z_prev,
                              double gamma);

// A labelled mini-batch with images flattened to [B, H*W*Ch].
struct Batch {
  Tensor images;
  std::vector<std::uint32_t> labels;
};

struct LossGraph {
  Var l_con;
  Var l_aug_text;
  Var l_aug_visual;
  Var total;
};

// Builds the combined objective for trainable `context` / `delta` leaves
// against frozen previous and global prompts.
LossGraph build_total_loss(Graph& g, const Backbone& backbone, const Batch& batch, Var context,
                           Var delta, const PromptPair& layout, const PromptPair& previous,
                           const PromptPair& global, const LossOptions& opts,
                           PatchOffset offset = {});

LossBreakdown breakdown(const LossGraph& graph, const LossOptions& opts);

LossBreakdown total_loss(const Backbone& backbone, const Batch& batch, const PromptPair& current,
                         const PromptPair& previous, const PromptPair& global,
                         const LossOptions& opts, PatchOffset offset = {});

}  // namespace tpfl

#endif  // TPFL_LOSSES_HPP_
