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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tpfl/error.hpp"
#include "tpfl/fd.hpp"
#include "tpfl/losses.hpp"

namespace tpfl {
namespace {

using testing::random_tensor;

Tensor unit_rows(Tensor t) {
  const std::size_t d = t.extent(t.rank() - 1);
  for (std::size_t r = 0; r < t.size() / d; ++r) {
    double n = 0.0;
    for (std::size_t j = 0; j < d; ++j) n += t[r * d + j] * t[r * d + j];
    n = std::sqrt(n);
    for (std::size_t j = 0; j < d; ++j) t[r * d + j] /= n;
  }
  return t;
}

// Independent scalar evaluation of the matching loss.
double matching_oracle(const Tensor& zt, const Tensor& zv, const std::vector<std::uint32_t>& y,
                       double gamma) {
  const std::size_t c = zt.extent(0), d = zt.extent(1), b = zv.extent(0);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<double> s(c);
    for (std::size_t k = 0; k < c; ++k) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += zv[i * d + j] * zt[k * d + j];
      s[k] = dot / gamma;
    }
    const double m = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double v : s) z += std::exp(v - m);
    total += -(s[y[i]] - m - std::log(z));
  }
  return total / static_cast<double>(b);
}

const double kLn2 = std::log(2.0);
// ln(1 + e^-1): the two-way softmax loss with logit gap 1.
const double kGapOneLoss = std::log1p(std::exp(-1.0));

TEST(MatchingLossTest, FrozenScalarValue) { EXPECT_NEAR(kGapOneLoss, 0.313262, 5e-7); }

TEST(MatchingLossTest, IdenticalTextRowsGiveLnC) {
  Rng rng(1);
  for (std::size_t c : {2, 5, 8}) {
    const Tensor row = unit_rows(random_tensor({1, 6}, rng));
    Tensor zt({c, 6});
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t j = 0; j < 6; ++j) zt[k * 6 + j] = row[j];
    const Tensor zv = unit_rows(random_tensor({4, 6}, rng));
    const std::vector<std::uint32_t> y{0, 1, 1, static_cast<std::uint32_t>(c - 1)};
    EXPECT_NEAR(clip_matching_loss(zt, zv, y, 0.07), std::log(static_cast<double>(c)), 1e-9);
  }
}

TEST(MatchingLossTest, TwoClassGapOne) {
  // z_vis . z_true = 1, z_vis . z_other = 0, gamma = 1.
  const Tensor zt = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor zv = Tensor::matrix({{1, 0}});
  const std::vector<std::uint32_t> y{0};
  EXPECT_NEAR(clip_matching_loss(zt, zv, y, 1.0), kGapOneLoss, 1e-12);
}

TEST(MatchingLossTest, MatchesScalarOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t c = testing::uniform_size(rng, 2, 8), b = testing::uniform_size(rng, 1, 6);
    const Tensor zt = unit_rows(random_tensor({c, 5}, rng));
    const Tensor zv = unit_rows(random_tensor({b, 5}, rng));
    std::vector<std::uint32_t> y(b);
    for (auto& v : y) v = static_cast<std::uint32_t>(rng() % c);
    const double loss = clip_matching_loss(zt, zv, y, 0.07);
    EXPECT_NEAR(loss, matching_oracle(zt, zv, y, 0.07), 1e-10);
    EXPECT_GE(loss, 0.0);
  }
}

TEST(MatchingLossTest, RelabelingSymmetry) {
  Rng rng(7);
  const Tensor zt = unit_rows(random_tensor({5, 4}, rng));
  const Tensor zv = unit_rows(random_tensor({6, 4}, rng));
  const std::vector<std::uint32_t> y{0, 4, 2, 2, 1, 3};
  std::vector<std::uint32_t> perm{3, 0, 4, 1, 2};  // old class k -> new class perm[k]
  Tensor zt2({5, 4});
  for (std::size_t k = 0; k < 5; ++k)
    for (std::size_t j = 0; j < 4; ++j) zt2[perm[k] * 4 + j] = zt[k * 4 + j];
  std::vector<std::uint32_t> y2;
  for (auto v : y) y2.push_back(perm[v]);
  EXPECT_NEAR(clip_matching_loss(zt, zv, y, 0.07), clip_matching_loss(zt2, zv, y2, 0.07), 1e-12);
}

TEST(MatchingLossTest, HugeTemperatureIsUniform) {
  Rng rng(8);
  const Tensor zt = unit_rows(random_tensor({8, 4}, rng));
  const Tensor zv = unit_rows(random_tensor({3, 4}, rng));
  const std::vector<std::uint32_t> y{1, 5, 7};
  EXPECT_NEAR(clip_matching_loss(zt, zv, y, 1e6), std::log(8.0), 1e-6);
}

TEST(MatchingLossTest, Errors) {
  const Tensor zt = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor zv = Tensor::matrix({{1, 0}});
  const std::vector<std::uint32_t> bad{2}, ok{0};
  EXPECT_THROW(clip_matching_loss(zt, zv, bad, 1.0), DomainError);
  EXPECT_THROW(clip_matching_loss(zt, zv, ok, 0.0), DomainError);
  Tensor nan = zv;
  nan[0] = std::nan("");
  EXPECT_THROW(clip_matching_loss(zt, nan, ok, 1.0), NumericalError);
  EXPECT_THROW(clip_matching_loss(zt, Tensor::matrix({{1, 0, 0}}), ok, 1.0), ShapeError);
}

TEST(MatchingLossTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 50);
    const Tensor zt = random_tensor({4, 5}, rng, 0.3), zv = random_tensor({3, 5}, rng, 0.3);
    const std::vector<std::uint32_t> y{0, 3, 1};
    ad::Graph g;
    ad::Var a = g.parameter(zt), b = g.parameter(zv);
    const auto grads = g.backward(clip_matching_loss(a, b, y, 0.5));
    const std::vector<Tensor> params{zt, zv};
    const auto num = ad::fd_gradient(
        [&](std::span<const Tensor> p) { return clip_matching_loss(p[0], p[1], y, 0.5); }, params,
        1e-5);
    EXPECT_LE(ad::max_relative_error(grads[a], num[0]), 1e-5);
    EXPECT_LE(ad::max_relative_error(grads[b], num[1]), 1e-5);
  }
}

TEST(InfoNceTest, IdenticalPositiveAndNegative) {
  Rng rng(2);
  const Tensor z = unit_rows(random_tensor({6}, rng)), w = unit_rows(random_tensor({6}, rng));
  EXPECT_NEAR(infonce_augmented_loss(z, w, w, 0.07), kLn2, 1e-9);
  ad::Graph g;
  ad::Var zn = g.parameter(z);
  const auto grads = g.backward(infonce_augmented_loss(zn, g.constant(w), g.constant(w), 0.07));
  for (double v : grads[zn].data()) EXPECT_EQ(v, 0.0);
}

TEST(InfoNceTest, GapOneValue) {
  const Tensor z = Tensor::vector({1, 0}), pos = Tensor::vector({1, 0}), neg = Tensor::vector({0, 1});
  EXPECT_NEAR(infonce_augmented_loss(z, pos, neg, 1.0), kGapOneLoss, 1e-12);
}

TEST(InfoNceTest, DecreasesAsPositiveSimilarityGrows) {
  // z_new fixed; s_p = 0 held by an orthogonal negative; s_g = cos(theta).
  const Tensor z = Tensor::vector({1, 0, 0}), neg = Tensor::vector({0, 0, 1});
  double last = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 10; ++i) {
    const double theta = M_PI * (1.0 - i / 10.0);
    const Tensor pos = Tensor::vector({std::cos(theta), std::sin(theta), 0});
    const double loss = infonce_augmented_loss(z, pos, neg, 0.5);
    EXPECT_LT(loss, last);
    EXPECT_GT(loss, 0.0);
    last = loss;
  }
}

TEST(InfoNceTest, HugeTemperatureIsLn2) {
  Rng rng(3);
  const Tensor a = unit_rows(random_tensor({5}, rng)), b = unit_rows(random_tensor({5}, rng)),
               c = unit_rows(random_tensor({5}, rng));
  EXPECT_NEAR(infonce_augmented_loss(a, b, c, 1e6), kLn2, 1e-6);
}

TEST(InfoNceTest, RowsAreAveraged) {
  Rng rng(4);
  const Tensor a = unit_rows(random_tensor({3, 4}, rng)), b = unit_rows(random_tensor({3, 4}, rng)),
               c = unit_rows(random_tensor({3, 4}, rng));
  double mean = 0.0;
  for (std::size_t r = 0; r < 3; ++r) {
    auto row = [r](const Tensor& t) {
      return Tensor({4}, std::vector<double>(t.values().begin() + r * 4,
                                             t.values().begin() + (r + 1) * 4));
    };
    mean += infonce_augmented_loss(row(a), row(b), row(c), 0.07) / 3.0;
  }
  EXPECT_NEAR(infonce_augmented_loss(a, b, c, 0.07), mean, 1e-12);
}

TEST(InfoNceTest, StopGradientOnPositiveAndNegative) {
  Rng rng(5);
  ad::Graph g;
  ad::Var a = g.parameter(unit_rows(random_tensor({4}, rng)));
  ad::Var b = g.parameter(unit_rows(random_tensor({4}, rng)));
  ad::Var c = g.parameter(unit_rows(random_tensor({4}, rng)));
  const auto grads = g.backward(infonce_augmented_loss(a, b, c, 0.07));
  for (double v : grads[b].data()) EXPECT_EQ(v, 0.0);
  for (double v : grads[c].data()) EXPECT_EQ(v, 0.0);
  double norm = 0.0;
  for (double v : grads[a].data()) norm += std::abs(v);
  EXPECT_GT(norm, 0.0);
}

class TotalLossTest : public ::testing::Test {
 protected:
  TotalLossTest() : backbone_(make_backbone(testing::tiny_spec(), 17)) {}

  PromptPair prompts(Rng& rng, VisualTemplate kind = VisualTemplate::kPadding) const {
    PromptPair p{make_text_prompt(random_tensor({2, 4}, rng, 0.5), 2, backbone_.class_embeddings),
                 make_visual_prompt(kind, 1, 6, 6, 1)};
    p.visual.delta = random_tensor({6, 6, 1}, rng, 0.3);
    project_to_mask(p.visual);
    return p;
  }

  Batch batch(Rng& rng, std::size_t n = 5) const {
    Batch b{random_tensor({n, 36}, rng), {}};
    for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<std::uint32_t>(i % 4));
    return b;
  }

  Backbone backbone_;
};

TEST_F(TotalLossTest, BreakdownInvariant) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const PromptPair cur = prompts(rng), prev = prompts(rng), glob = prompts(rng);
    const Batch b = batch(rng);
    for (double mu : {0.0, 0.5, 1.0, 3.0}) {
      const LossBreakdown l = total_loss(backbone_, b, cur, prev, glob, {mu, 0.07});
      EXPECT_NEAR(l.total, l.l_con + mu * (l.l_aug_text + l.l_aug_visual), 1e-12);
      EXPECT_GE(l.l_con, 0.0);
      EXPECT_GT(l.l_aug_text, 0.0);
      EXPECT_GT(l.l_aug_visual, 0.0);
      EXPECT_EQ(l.mu, mu);
    }
  }
}

TEST_F(TotalLossTest, ZeroMuIsMatchingLossExactly) {
  Rng rng(1);
  const PromptPair cur = prompts(rng), prev = prompts(rng), glob = prompts(rng);
  const LossBreakdown l = total_loss(backbone_, batch(rng), cur, prev, glob, {0.0, 0.07});
  EXPECT_EQ(l.total, l.l_con);
}

TEST_F(TotalLossTest, DegenerateContrastIsLn2) {
  Rng rng(2);
  const PromptPair p = prompts(rng);
  for (auto mode : {TextAugMode::kPerClass, TextAugMode::kPooled}) {
    const LossBreakdown l = total_loss(backbone_, batch(rng), p, p, p, {1.0, 0.07, mode});
    EXPECT_NEAR(l.l_aug_text, kLn2, 1e-12);
    EXPECT_NEAR(l.l_aug_visual, kLn2, 1e-12);
  }
}

TEST_F(TotalLossTest, PerClassTextTermAveragesClasses) {
  Rng rng(3);
  const PromptPair cur = prompts(rng), prev = prompts(rng), glob = prompts(rng);
  const LossBreakdown l = total_loss(backbone_, batch(rng), cur, prev, glob, {1.0, 0.07});
  double mean = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    mean += infonce_augmented_loss(encode_text(cur.text, backbone_.text_encoder, c),
                                   encode_text(glob.text, backbone_.text_encoder, c),
                                   encode_text(prev.text, backbone_.text_encoder, c), 0.07) /
            4.0;
  }
  EXPECT_NEAR(l.l_aug_text, mean, 1e-12);
}

TEST_F(TotalLossTest, VisualTermUsesBatchMeanImage) {
  Rng rng(4);
  const PromptPair cur = prompts(rng), prev = prompts(rng), glob = prompts(rng);
  const Batch b = batch(rng, 3);
  Tensor mean({6, 6, 1});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 36; ++j) mean[j] += b.images[r * 36 + j] / 3.0;
  Rng unused(0);
  auto z = [&](const PromptPair& p) {
    return encode_image(apply_visual_prompt(mean, p.visual, unused), backbone_.visual_encoder);
  };
  const LossBreakdown l = total_loss(backbone_, b, cur, prev, glob, {1.0, 0.07});
  EXPECT_NEAR(l.l_aug_visual, infonce_augmented_loss(z(cur), z(glob), z(prev), 0.07), 1e-12);
}

TEST_F(TotalLossTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 300);
    const auto kind = static_cast<VisualTemplate>(seed % 3);
    const PromptPair cur = prompts(rng, kind), prev = prompts(rng, kind), glob = prompts(rng, kind);
    const Batch b = batch(rng);
    const LossOptions opts{1.0, 0.07, seed % 2 ? TextAugMode::kPooled : TextAugMode::kPerClass};
    const PatchOffset offset = draw_patch_offset(cur.visual, rng);
    ad::Graph g;
    ad::Var ctx = g.parameter(cur.text.context), delta = g.parameter(cur.visual.delta);
    const LossGraph lg = build_total_loss(g, backbone_, b, ctx, delta, cur, prev, glob, opts, offset);
    const auto grads = g.backward(lg.total);
    const std::vector<Tensor> params{cur.text.context, cur.visual.delta};
    const auto num = ad::fd_gradient(
        [&](std::span<const Tensor> p) {
          PromptPair q = cur;
          q.text.context = p[0];
          q.visual.delta = p[1];
          return total_loss(backbone_, b, q, prev, glob, opts, offset).total;
        },
        params, 1e-4);
    EXPECT_LE(ad::max_relative_error(grads[ctx], num[0]), 1e-5) << "seed " << seed;
    EXPECT_LE(ad::max_relative_error(grads[delta], num[1]), 1e-5) << "seed " << seed;
  }
}

}  // namespace
}  // namespace tpfl
