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

#include "tpfl/encoders.hpp"

#include <cmath>
#include <string>

#include "tpfl/error.hpp"

namespace tpfl {
namespace {

using namespace tpfl::ad;

constexpr double kBiasStd = 0.1;

Tensor gaussian(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

FrozenEncoder::FrozenEncoder(EncoderKind kind, std::vector<std::size_t> widths,
                             std::uint64_t seed)
    : kind_(kind), widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ShapeError("encoder: need at least input and output widths");
  for (std::size_t w : widths_) {
    if (w == 0) throw ShapeError("encoder: zero layer width");
  }
  Rng rng(derive_seed(seed, kind_ == EncoderKind::kText ? "text" : "visual"));
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const double fan_in = static_cast<double>(widths_[l]);
    weights_.push_back(gaussian({widths_[l], widths_[l + 1]}, 1.0 / std::sqrt(fan_in), rng));
    biases_.push_back(gaussian({widths_[l + 1]}, kBiasStd, rng));
  }
}

Var FrozenEncoder::forward(Graph& g, Var x) const {
  const bool single = x.shape().size() == 1;
  if ((single && x.shape()[0] != input_width()) ||
      (!single && (x.shape().size() != 2 || x.shape()[1] != input_width()))) {
    throw ShapeError("encoder: input shape " + shape_string(x.shape()) +
                     " does not match input width " + std::to_string(input_width()));
  }
  Var h = single ? reshape(x, {1, input_width()}) : x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = add_bias(matmul(h, g.constant(weights_[l])), g.constant(biases_[l]));
    if (l + 1 < weights_.size()) h = ad::tanh(h);
  }
  h = l2_normalize(h, 1);
  return single ? reshape(h, {output_width()}) : h;
}

Tensor FrozenEncoder::forward(const Tensor& x) const {
  Graph g;
  return forward(g, g.constant(x)).value();
}

std::uint64_t FrozenEncoder::fingerprint() const {
  std::uint64_t h = static_cast<std::uint64_t>(kind_) + 1;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = derive_seed(h, tpfl::fingerprint(weights_[l]));
    h = derive_seed(h, tpfl::fingerprint(biases_[l]));
  }
  return h;
}

Tensor make_class_embeddings(std::uint64_t seed, std::size_t classes, std::size_t token_dim) {
  if (classes < 2) throw DomainError("class embeddings: need at least 2 classes");
  if (token_dim == 0) throw ShapeError("class embeddings: zero token dim");
  Tensor out({classes, token_dim});
  std::normal_distribution<double> dist(0.0, 1.0);
  for (std::size_t c = 0; c < classes; ++c) {
    Rng rng(derive_seed(derive_seed(seed, "class_embedding"), c));
    for (std::size_t j = 0; j < token_dim; ++j) out[c * token_dim + j] = dist(rng);
  }
  return out;
}

TextPrompt make_text_prompt(Tensor context, std::size_t class_position,
                            std::shared_ptr<const Tensor> class_embeddings) {
  if (context.rank() != 2) {
    throw ShapeError("text prompt: context must be [L, d_tok], got " +
                     shape_string(context.shape()));
  }
  const std::size_t length = context.extent(0);
  if (length < 1 || length > kMaxContextLength) {
    throw DomainError("text prompt: context length " + std::to_string(length) +
                      " outside [1, 64]");
  }
  if (class_position > length) {
    throw DomainError("text prompt: class position " + std::to_string(class_position) +
                      " exceeds context length " + std::to_string(length));
  }
  if (!class_embeddings || class_embeddings->rank() != 2 ||
      class_embeddings->extent(1) != context.extent(1)) {
    throw ShapeError("text prompt: class embeddings must be [C, " +
                     std::to_string(context.extent(1)) + "]");
  }
  return TextPrompt{std::move(context), class_position, std::move(class_embeddings)};
}

std::string_view template_name(VisualTemplate t) {
  switch (t) {
    case VisualTemplate::kPadding: return "padding";
    case VisualTemplate::kFixedPatch: return "fixed_patch";
    case VisualTemplate::kRandomPatch: return "random_patch";
  }
  return "padding";
}

VisualTemplate parse_template(std::string_view name) {
  if (name == "padding") return VisualTemplate::kPadding;
  if (name == "fixed_patch") return VisualTemplate::kFixedPatch;
  if (name == "random_patch") return VisualTemplate::kRandomPatch;
  throw DomainError("unknown visual template '" + std::string(name) + "'");
}

Tensor make_mask(VisualTemplate kind, std::size_t size, std::size_t height, std::size_t width) {
  if (size == 0) throw DomainError("visual prompt: template size must be positive");
  Tensor mask({height, width});
  if (kind == VisualTemplate::kPadding) {
    if (2 * size > height || 2 * size > width) {
      throw DomainError("visual prompt: pad width " + std::to_string(size) +
                        " too large for " + std::to_string(height) + "x" +
                        std::to_string(width));
    }
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c) {
        const bool border = r < size || r >= height - size || c < size || c >= width - size;
        mask[r * width + c] = border ? 1.0 : 0.0;
      }
    return mask;
  }
  if (size > height || size > width) {
    throw DomainError("visual prompt: patch size " + std::to_string(size) +
                      " exceeds image " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) mask[r * width + c] = 1.0;
  return mask;
}

VisualPrompt make_visual_prompt(VisualTemplate kind, std::size_t size, std::size_t height,
                                std::size_t width, std::size_t channels) {
  if (height == 0 || width == 0 || channels == 0) {
    throw ShapeError("visual prompt: zero image extent");
  }
  return VisualPrompt{Tensor({height, width, channels}), kind, size,
                      make_mask(kind, size, height, width)};
}

void project_to_mask(VisualPrompt& vp) {
  const std::size_t ch = vp.channels();
  for (std::size_t p = 0; p < vp.mask.size(); ++p) {
    if (vp.mask[p] == 0.0) {
      for (std::size_t k = 0; k < ch; ++k) vp.delta[p * ch + k] = 0.0;
    }
  }
}

PatchOffset draw_patch_offset(const VisualPrompt& vp, Rng& rng) {
  if (vp.kind != VisualTemplate::kRandomPatch) return {};
  std::uniform_int_distribution<std::size_t> rows(0, vp.height() - vp.size);
  std::uniform_int_distribution<std::size_t> cols(0, vp.width() - vp.size);
  const std::size_t r = rows(rng);
  return PatchOffset{r, cols(rng)};
}

Tensor placed_mask(const VisualPrompt& vp, PatchOffset offset) {
  const std::size_t h = vp.height(), w = vp.width(), ch = vp.channels();
  Tensor out({h, w, ch});
  if (vp.kind != VisualTemplate::kRandomPatch) {
    for (std::size_t p = 0; p < h * w; ++p)
      for (std::size_t k = 0; k < ch; ++k) out[p * ch + k] = vp.mask[p];
    return out;
  }
  if (offset.row + vp.size > h || offset.col + vp.size > w) {
    throw DomainError("visual prompt: patch offset out of range");
  }
  for (std::size_t r = 0; r < vp.size; ++r)
    for (std::size_t c = 0; c < vp.size; ++c)
      for (std::size_t k = 0; k < ch; ++k)
        out[((offset.row + r) * w + offset.col + c) * ch + k] = 1.0;
  return out;
}

Var text_sequence(Graph& g, Var context, const TextPrompt& layout, std::size_t class_id) {
  const std::size_t classes = layout.class_count();
  if (class_id >= classes) {
    throw DomainError("encode_text: class id " + std::to_string(class_id) +
                      " out of range for " + std::to_string(classes) + " classes");
  }
  const std::size_t length = context.shape().at(0);
  const std::size_t dim = layout.class_embeddings->extent(1);
  if (context.shape() != Shape{length, dim}) {
    throw ShapeError("encode_text: context shape " + shape_string(context.shape()) +
                     " does not match token dim " + std::to_string(dim));
  }
  const std::size_t pos = layout.class_position;
  if (pos > length) throw DomainError("encode_text: class position exceeds context length");
  const auto& emb = layout.class_embeddings->values();
  Tensor row({1, dim}, std::vector<double>(emb.begin() + static_cast<std::ptrdiff_t>(class_id * dim),
                                           emb.begin() + static_cast<std::ptrdiff_t>((class_id + 1) * dim)));
  std::vector<Var> parts;
  if (pos > 0) parts.push_back(slice(context, 0, pos, 0));
  parts.push_back(g.constant(std::move(row)));
  if (pos < length) parts.push_back(slice(context, pos, length, 0));
  // Tokens are RMS-normalized before the MLP, as a layer norm would; the
  // context then steers the encoder by direction rather than magnitude.
  return reshape(rms_normalize(concat(parts, 0), 1), {1, (length + 1) * dim});
}

Var encode_text(Graph& g, const FrozenEncoder& enc, Var context, const TextPrompt& layout,
                std::size_t class_id) {
  Var seq = text_sequence(g, context, layout, class_id);
  return reshape(enc.forward(g, seq), {enc.output_width()});
}

Var encode_text_all(Graph& g, const FrozenEncoder& enc, Var context, const TextPrompt& layout) {
  std::vector<Var> rows;
  rows.reserve(layout.class_count());
  for (std::size_t c = 0; c < layout.class_count(); ++c) {
    rows.push_back(text_sequence(g, context, layout, c));
  }
  return enc.forward(g, concat(rows, 0));
}

Var placed_delta(Graph& g, Var delta, const VisualPrompt& vp, PatchOffset offset) {
  if (delta.shape() != vp.delta.shape()) {
    throw ShapeError("visual prompt: delta shape " + shape_string(delta.shape()) +
                     " vs template " + shape_string(vp.delta.shape()));
  }
  const std::size_t h = vp.height(), w = vp.width(), ch = vp.channels();
  if (vp.kind != VisualTemplate::kRandomPatch || (offset.row == 0 && offset.col == 0)) {
    return masked_add(g.constant(Tensor(delta.shape())), delta, placed_mask(vp, offset));
  }
  // Move the stored top-left patch to the drawn offset by zero padding.
  const std::size_t p = vp.size;
  placed_mask(vp, offset);  // range check
  Var patch = slice(slice(delta, 0, p, 0), 0, p, 1);
  std::vector<Var> cols;
  if (offset.col > 0) cols.push_back(g.constant(Tensor({p, offset.col, ch})));
  cols.push_back(patch);
  if (offset.col + p < w) cols.push_back(g.constant(Tensor({p, w - offset.col - p, ch})));
  Var band = concat(cols, 1);
  std::vector<Var> rows;
  if (offset.row > 0) rows.push_back(g.constant(Tensor({offset.row, w, ch})));
  rows.push_back(band);
  if (offset.row + p < h) rows.push_back(g.constant(Tensor({h - offset.row - p, w, ch})));
  return concat(rows, 0);
}

Var apply_visual_prompt(Graph& g, Var image, Var delta, const VisualPrompt& vp,
                        PatchOffset offset) {
  if (image.shape() != vp.delta.shape()) {
    throw ShapeError("apply_visual_prompt: image shape " + shape_string(image.shape()) +
                     " vs prompt " + shape_string(vp.delta.shape()));
  }
  return add(image, placed_delta(g, delta, vp, offset));
}

Var encode_image(Graph& g, Var prompted_image, const FrozenEncoder& enc) {
  const std::size_t n = prompted_image.value().size();
  if (n != enc.input_width()) {
    throw ShapeError("encode_image: image of " + std::to_string(n) +
                     " values does not match encoder input width " +
                     std::to_string(enc.input_width()));
  }
  return enc.forward(g, reshape(prompted_image, {n}));
}

Var encode_images(Graph& g, Var images, Var delta, const VisualPrompt& vp, PatchOffset offset,
                  const FrozenEncoder& enc) {
  const std::size_t n = vp.delta.size();
  if (images.shape().size() != 2 || images.shape()[1] != n) {
    throw ShapeError("encode_images: batch shape " + shape_string(images.shape()) +
                     " does not match prompt size " + std::to_string(n));
  }
  Var bias = reshape(placed_delta(g, delta, vp, offset), {n});
  return enc.forward(g, add_bias(images, bias));
}

Tensor encode_text(const TextPrompt& prompt, const FrozenEncoder& enc, std::size_t class_id) {
  Graph g;
  return encode_text(g, enc, g.constant(prompt.context), prompt, class_id).value();
}

Tensor encode_text_all(const TextPrompt& prompt, const FrozenEncoder& enc) {
  Graph g;
  return encode_text_all(g, enc, g.constant(prompt.context), prompt).value();
}

Tensor apply_visual_prompt(const Tensor& image, const VisualPrompt& vp, Rng& rng) {
  Graph g;
  const PatchOffset offset = draw_patch_offset(vp, rng);
  return apply_visual_prompt(g, g.constant(image), g.constant(vp.delta), vp, offset).value();
}

Tensor encode_image(const Tensor& prompted_image, const FrozenEncoder& enc) {
  Graph g;
  return encode_image(g, g.constant(prompted_image), enc).value();
}

std::uint64_t Backbone::fingerprint() const {
  std::uint64_t h = derive_seed(text_encoder.fingerprint(), visual_encoder.fingerprint());
  return derive_seed(h, tpfl::fingerprint(*class_embeddings));
}

Backbone make_backbone(const BackboneSpec& spec, std::uint64_t seed) {
  const std::size_t text_in = spec.token_dim * (spec.context_length + 1);
  const std::size_t visual_in = spec.height * spec.width * spec.channels;
  return Backbone{
      FrozenEncoder(EncoderKind::kText, {text_in, spec.text_hidden, spec.embed_dim}, seed),
      FrozenEncoder(EncoderKind::kVisual, {visual_in, spec.visual_hidden, spec.embed_dim}, seed),
      std::make_shared<const Tensor>(make_class_embeddings(seed, spec.classes, spec.token_dim)),
  };
}

}  // namespace tpfl
