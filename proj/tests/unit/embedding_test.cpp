// SPDX-License-Identifier: Apache-2.0
#include "patchcrypt/embedding.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "patchcrypt/blockcipher.hpp"
#include "test_support.hpp"

namespace patchcrypt {
namespace {

// Naive oracle: reads pixels directly and walks the [D][3][P][P] kernel.
TokenGrid naive_forward(const std::vector<float>& kernel, const std::vector<float>& bias,
                        std::size_t p, std::size_t dim, double mean, double sd, const Image& img) {
  TokenGrid g{img.height() / p, img.width() / p, dim, {}};
  for (std::size_t by = 0; by < g.rows; ++by) {
    for (std::size_t bx = 0; bx < g.cols; ++bx) {
      for (std::size_t d = 0; d < dim; ++d) {
        double acc = 0.0;
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t r = 0; r < p; ++r)
            for (std::size_t s = 0; s < p; ++s) {
              double x = img.at(by * p + r, bx * p + s, c) / 255.0;
              acc += static_cast<double>(kernel[((d * 3 + c) * p + r) * p + s]) * ((x - mean) / sd);
            }
        g.values.push_back(acc + bias[d]);
      }
    }
  }
  return g;
}

TEST(EmbedForward, ZeroWeightGivesBias) {
  PatchEmbedding pe(2, 3, std::vector<float>(36, 0.0f), {0.5f, -1.0f, 2.0f});
  std::mt19937_64 rng(1);
  TokenGrid g = embed_forward(pe, testing::random_image(rng, 4, 6));
  ASSERT_EQ(g.token_count(), 6u);
  for (std::size_t t = 0; t < 6; ++t) {
    EXPECT_EQ(g.values[t * 3 + 0], 0.5);
    EXPECT_EQ(g.values[t * 3 + 1], -1.0);
    EXPECT_EQ(g.values[t * 3 + 2], 2.0);
  }
}

TEST(EmbedForward, SinglePixelUnitWeights) {
  PatchEmbedding pe(1, 1, {1, 1, 1}, {0}, Normalization::uniform(0.0, 1.0));
  TokenGrid g = embed_forward(pe, Image(1, 1, {255, 0, 0}));
  EXPECT_EQ(g.values, std::vector<double>{1.0});
}

TEST(EmbedForward, MatchesNaiveOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> kernel(3 * 3 * 4);
    std::vector<float> bias(3);
    for (auto& v : kernel) v = u(rng);
    for (auto& v : bias) v = u(rng);
    Image img = testing::random_image(rng, 4, 4);
    auto pe = PatchEmbedding::from_conv_layout(kernel, bias, 2, 3, Normalization::uniform(0.3, 0.7));
    TokenGrid got = embed_forward(pe, img);
    TokenGrid want = naive_forward(kernel, bias, 2, 3, 0.3, 0.7, img);
    ASSERT_EQ(got.values.size(), want.values.size());
    for (std::size_t i = 0; i < want.values.size(); ++i) {
      EXPECT_NEAR(got.values[i], want.values[i], 1e-12);
    }
  }
}

TEST(EmbedForward, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(3);
  PatchEmbedding pe = testing::random_embedding(rng, 4, 16);
  Image img = testing::random_image(rng, 64, 40);
  EXPECT_EQ(embed_forward(pe, img, 1).values, embed_forward(pe, img, 4).values);
  EXPECT_EQ(embed_forward(pe, img, 1).values, embed_forward(pe, img, 64).values);
}

TEST(EmbedForward, GeometryError) {
  std::mt19937_64 rng(4);
  PatchEmbedding pe = testing::random_embedding(rng, 16, 2);
  EXPECT_THROW(embed_forward(pe, Image(17, 16)), GeometryError);
}

TEST(FromConvLayout, SinglePixelKernel) {
  auto pe = PatchEmbedding::from_conv_layout(std::vector<float>{2.0f, 3.0f, 4.0f},
                                             std::vector<float>{0.0f}, 1, 1);
  EXPECT_EQ(pe.weight_at(0, 0), 2.0f);
  EXPECT_EQ(pe.weight_at(0, 1), 3.0f);
  EXPECT_EQ(pe.weight_at(0, 2), 4.0f);
}

TEST(FromConvLayout, IndexArithmetic) {
  std::vector<float> kernel(2 * 3 * 2 * 2);
  for (std::size_t i = 0; i < kernel.size(); ++i) kernel[i] = static_cast<float>(i) * 0.5f;
  auto pe = PatchEmbedding::from_conv_layout(kernel, std::vector<float>{1, 2}, 2, 2);
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t s = 0; s < 2; ++s)
          EXPECT_EQ(pe.weight_at(d, c * 4 + r * 2 + s), kernel[((d * 3 + c) * 2 + r) * 2 + s]);
  // Spot values: d=1, c=2, r=1, s=0 -> kernel index 22.
  EXPECT_EQ(pe.weight_at(1, 10), 11.0f);
  EXPECT_EQ(pe.to_conv_layout(), kernel);
}

TEST(FromConvLayout, ShapeMismatch) {
  EXPECT_THROW(PatchEmbedding::from_conv_layout(std::vector<float>(11), std::vector<float>(1), 1, 4),
               InvalidArgument);
  EXPECT_THROW(PatchEmbedding::from_conv_layout(std::vector<float>(3), std::vector<float>(2), 1, 1),
               InvalidArgument);
  EXPECT_THROW(PatchEmbedding(1, 1, {1, 1, 1}, {0}, Normalization::uniform(0.5, 0.0)),
               InvalidArgument);
}

TEST(AdaptEmbedding, ThreeElementGather) {
  PatchEmbedding pe(1, 1, {1, 2, 3}, {0});
  PatchEmbedding adapted = adapt_embedding(pe, Permutation({2, 0, 1}));
  EXPECT_EQ(std::vector<float>(adapted.weight().begin(), adapted.weight().end()),
            (std::vector<float>{3, 1, 2}));
  auto key = testing::find_key_for({2, 0, 1});
  ASSERT_TRUE(key.has_value());
  EXPECT_EQ(adapt_embedding(pe, *key), adapted);
}

TEST(AdaptEmbedding, IdentityAndInverse) {
  std::mt19937_64 rng(5);
  PatchEmbedding pe = testing::random_embedding(rng, 4, 8);
  EXPECT_EQ(adapt_embedding(pe, Permutation::identity(48)), pe);
  Permutation sigma = generate_permutation(testing::random_key(rng), 48);
  EXPECT_EQ(adapt_embedding(adapt_embedding(pe, sigma), invert(sigma)), pe);
  EXPECT_THROW(adapt_embedding(pe, Permutation::identity(47)), InvalidArgument);
}

TEST(AdaptEmbedding, RowsKeepTheirValues) {
  std::mt19937_64 rng(6);
  PatchEmbedding pe = testing::random_embedding(rng, 8, 4);
  PatchEmbedding adapted = adapt_embedding(pe, testing::random_key(rng));
  EXPECT_EQ(adapted.bias()[0], pe.bias()[0]);
  for (std::size_t d = 0; d < 4; ++d) {
    std::vector<float> a(pe.weight().begin() + d * 192, pe.weight().begin() + (d + 1) * 192);
    std::vector<float> b(adapted.weight().begin() + d * 192, adapted.weight().begin() + (d + 1) * 192);
    EXPECT_NE(a, b);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST(VerifyEquivariance, HoldsForRandomInstances) {
  std::mt19937_64 rng(7);
  const std::size_t patches[] = {1, 2, 4, 8, 16};
  const std::size_t dims[] = {1, 8, 64};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = patches[trial % 5];
    const std::size_t d = dims[trial % 3];
    PatchEmbedding pe = testing::random_embedding(rng, p, d);
    Image img = testing::random_image(rng, p * (1 + rng() % 3), p * (1 + rng() % 3));
    EquivalenceReport r = verify_equivariance(pe, testing::random_key(rng), img, 1e-9);
    ASSERT_TRUE(r.pass) << "P=" << p << " D=" << d << " max=" << r.max_abs_diff;
    EXPECT_GE(r.max_abs_diff, r.mean_abs_diff);
    EXPECT_GE(r.mean_abs_diff, 0.0);
  }
}

TEST(VerifyEquivariance, IdentityKeyIsExact) {
  auto key = testing::find_key_for({0, 1, 2});
  ASSERT_TRUE(key.has_value());
  std::mt19937_64 rng(8);
  PatchEmbedding pe = testing::random_embedding(rng, 1, 8);
  EquivalenceReport r = verify_equivariance(pe, *key, testing::random_image(rng, 5, 3), 0.0);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.max_abs_diff, 0.0);
  EXPECT_EQ(r.token_count, 15u);
}

TEST(VerifyEquivariance, WrongKeyFails) {
  std::mt19937_64 rng(9);
  PatchEmbedding pe = testing::random_embedding(rng, 4, 8);
  Image img = testing::random_image(rng, 8, 8);
  SecretKey k1 = testing::random_key(rng);
  SecretKey k2 = testing::random_key(rng);
  TokenGrid plain = embed_forward(pe, img);
  TokenGrid mixed = embed_forward(adapt_embedding(pe, k1), encrypt_image(img, k2, 4));
  EquivalenceReport r = compare_tokens(plain, mixed, 1e-9);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.max_abs_diff, 1e-3);
}

TEST(VerifyEquivariance, ChannelWiseNormalizationBreaksIt) {
  std::mt19937_64 rng(10);
  Normalization imagenet{{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
  int failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    PatchEmbedding pe = testing::random_embedding(rng, 4, 8, imagenet);
    Image img = testing::random_image(rng, 8, 8);
    if (!verify_equivariance(pe, testing::random_key(rng), img, 1e-6).pass) ++failures;
  }
  EXPECT_EQ(failures, 20);
}

TEST(EquivalenceReport, JsonShape) {
  EquivalenceReport r{0.25, 0.125, 4, 1e-9, false};
  EXPECT_EQ(r.to_json(), "{\"max_abs_diff\":0.25,\"mean_abs_diff\":0.125,\"tokens\":4,\"pass\":false}");
}

}  // namespace
}  // namespace patchcrypt
