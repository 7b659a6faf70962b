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

#ifndef TPFL_ENCODERS_HPP_
#define TPFL_ENCODERS_HPP_

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "tpfl/graph.hpp"
#include "tpfl/seeds.hpp"
#include "tpfl/tensor.hpp"

namespace tpfl {

using ad::Graph;
using ad::Var;

enum class EncoderKind { kText, kVisual };

// Frozen tanh MLP whose output rows are projected onto the unit sphere.
// widths = {input, hidden..., output}; every layer but the last applies tanh.
class FrozenEncoder {
 public:
  FrozenEncoder(EncoderKind kind, std::vector<std::size_t> widths, std::uint64_t seed);

  EncoderKind kind() const noexcept { return kind_; }
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }

  // x is [B, input] -> [B, output], or [input] -> [output].
  Var forward(Graph& g, Var x) const;
  Tensor forward(const Tensor& x) const;

  std::uint64_t fingerprint() const;

 private:
  EncoderKind kind_;
  std::vector<std::size_t> widths_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

// Frozen stand-ins for class-name word embeddings: row c is drawn i.i.d.
// standard normal from a stream derived from (seed, c).
Tensor make_class_embeddings(std::uint64_t seed, std::size_t classes, std::size_t token_dim);

inline constexpr std::size_t kMaxContextLength = 64;

struct TextPrompt {
  Tensor context;  // [L, token_dim], the only trainable part
  std::size_t class_position = 0;  // insertion index of the class token, in [0, L]
  std::shared_ptr<const Tensor> class_embeddings;  // [C, token_dim]

  std::size_t context_length() const { return context.extent(0); }
  std::size_t token_dim() const { return context.extent(1); }
  std::size_t class_count() const { return class_embeddings->extent(0); }
};

TextPrompt make_text_prompt(Tensor context, std::size_t class_position,
                            std::shared_ptr<const Tensor> class_embeddings);

enum class VisualTemplate { kPadding, kFixedPatch, kRandomPatch };

std::string_view template_name(VisualTemplate t);
VisualTemplate parse_template(std::string_view name);

// One trainable pixel-space prompt per client. For padding and fixed_patch
// the delta is applied in place; for random_patch the top-left
// size x size block of delta holds the patch content, which is moved to a
// freshly drawn offset every batch.
struct VisualPrompt {
  Tensor delta;  // [H, W, Ch]
  VisualTemplate kind = VisualTemplate::kPadding;
  std::size_t size = 1;  // pad width or patch side
  Tensor mask;           // [H, W] storage mask, 1 where delta may be nonzero

  std::size_t height() const { return delta.extent(0); }
  std::size_t width() const { return delta.extent(1); }
  std::size_t channels() const { return delta.extent(2); }
};

Tensor make_mask(VisualTemplate kind, std::size_t size, std::size_t height, std::size_t width);
VisualPrompt make_visual_prompt(VisualTemplate kind, std::size_t size, std::size_t height,
                                std::size_t width, std::size_t channels);

// Zeroes every delta entry outside the storage mask.
void project_to_mask(VisualPrompt& vp);

struct PatchOffset {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const PatchOffset&, const PatchOffset&) = default;
};

// Uniform over valid placements for random_patch; consumes nothing and
// returns the origin for the other templates.
PatchOffset draw_patch_offset(const VisualPrompt& vp, Rng& rng);

// Effective [H, W, Ch] mask of pixels touched by the prompt at `offset`.
Tensor placed_mask(const VisualPrompt& vp, PatchOffset offset);

// Graph builders. `context` and `delta` are usually trainable leaves.
Var text_sequence(Graph& g, Var context, const TextPrompt& layout, std::size_t class_id);
Var encode_text(Graph& g, const FrozenEncoder& enc, Var context, const TextPrompt& layout,
                std::size_t class_id);
Var encode_text_all(Graph& g, const FrozenEncoder& enc, Var context, const TextPrompt& layout);
Var placed_delta(Graph& g, Var delta, const VisualPrompt& vp, PatchOffset offset);
Var apply_visual_prompt(Graph& g, Var image, Var delta, const VisualPrompt& vp,
                        PatchOffset offset);
Var encode_image(Graph& g, Var prompted_image, const FrozenEncoder& enc);
// images: [B, H*W*Ch] -> [B, D], with the placed prompt added to every row.
Var encode_images(Graph& g, Var images, Var delta, const VisualPrompt& vp, PatchOffset offset,
                  const FrozenEncoder& enc);

// Value-level conveniences.
Tensor encode_text(const TextPrompt& prompt, const FrozenEncoder& enc, std::size_t class_id);
Tensor encode_text_all(const TextPrompt& prompt, const FrozenEncoder& enc);
Tensor apply_visual_prompt(const Tensor& image, const VisualPrompt& vp, Rng& rng);
Tensor encode_image(const Tensor& prompted_image, const FrozenEncoder& enc);

// One client's (or the server's) trainable state.
struct PromptPair {
  TextPrompt text;
  VisualPrompt visual;
};

struct BackboneSpec {
  std::size_t classes = 8;
  std::size_t context_length = 4;
  std::size_t token_dim = 64;
  std::size_t embed_dim = 32;
  std::size_t text_hidden = 64;
  std::size_t visual_hidden = 64;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 1;
};

// Everything that stays frozen during a run.
struct Backbone {
  FrozenEncoder text_encoder;
  FrozenEncoder visual_encoder;
  std::shared_ptr<const Tensor> class_embeddings;

  std::uint64_t fingerprint() const;
};

Backbone make_backbone(const BackboneSpec& spec, std::uint64_t seed);

}  // namespace tpfl

#endif  // TPFL_ENCODERS_HPP_
