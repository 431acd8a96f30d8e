// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "patchcrypt/image.hpp"
#include "patchcrypt/keyschedule.hpp"

namespace patchcrypt {

/// Input normalization v = (x/255 - mean[c]) / stddev[c].
///
/// Block encryption moves values between channels, so the adapted embedding
/// only reproduces the plain tokens when all three channels share the same
/// statistics. Per-channel values are accepted so that failure can be shown.
struct Normalization {
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> stddev{0.5, 0.5, 0.5};

  static Normalization uniform(double mean, double stddev);
  bool is_uniform() const noexcept;
  /// Throws InvalidArgument unless every stddev is positive and finite.
  void validate() const;

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// Linear patch embedding: token = W * normalize(flatten_block(patch)) + b.
/// W is D x 3P^2 (row-major, float32), columns in canonical block order.
class PatchEmbedding {
 public:
  PatchEmbedding(std::size_t patch_size, std::size_t dim, std::vector<float> weight,
                 std::vector<float> bias, Normalization norm = {});

  /// Builds from a stride-P convolution kernel laid out [D][3][P][P].
  static PatchEmbedding from_conv_layout(std::span<const float> kernel,
                                         std::span<const float> bias,
                                         std::size_t patch_size, std::size_t dim,
                                         Normalization norm = {});
  /// The weight as a [D][3][P][P] kernel.
  std::vector<float> to_conv_layout() const;

  std::size_t patch_size() const noexcept { return patch_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t inputs() const noexcept { return 3 * patch_ * patch_; }
  std::span<const float> weight() const noexcept { return weight_; }
  std::span<const float> bias() const noexcept { return bias_; }
  const Normalization& norm() const noexcept { return norm_; }

  float weight_at(std::size_t row, std::size_t col) const {
    return weight_[row * inputs() + col];
  }

  friend bool operator==(const PatchEmbedding&, const PatchEmbedding&) = default;

 private:
  std::size_t patch_;
  std::size_t dim_;
  std::vector<float> weight_;
  std::vector<float> bias_;
  Normalization norm_;
};

/// Embedding output: one D-vector per block, blocks in raster order.
struct TokenGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t token_count() const noexcept { return rows * cols; }
  double at(std::size_t row, std::size_t col, std::size_t d) const {
    return values[(row * cols + col) * dim + d];
  }
};

struct EquivalenceReport {
  double max_abs_diff = 0.0;
  double mean_abs_diff = 0.0;
  std::size_t token_count = 0;
  double tolerance = 0.0;
  bool pass = false;

  /// {"max_abs_diff":..,"mean_abs_diff":..,"tokens":..,"pass":..}
  std::string to_json() const;
};

/// Forward pass with double accumulation, summing in ascending canonical
/// index order. Blocks may be split across `threads` workers; the result is
/// identical for any thread count. Throws GeometryError on a misaligned image.
TokenGrid embed_forward(const PatchEmbedding& pe, const Image& img, unsigned threads = 1);

/// weight'[d, i] = weight[d, perm[i]]; bias, patch size and norm unchanged.
PatchEmbedding adapt_embedding(const PatchEmbedding& pe, const Permutation& perm);
PatchEmbedding adapt_embedding(const PatchEmbedding& pe, const SecretKey& key);

/// Elementwise comparison of two grids of the same shape.
EquivalenceReport compare_tokens(const TokenGrid& a, const TokenGrid& b, double tol);

/// Compares the plain model on the plain image against the adapted model on
/// the encrypted image.
EquivalenceReport verify_equivariance(const PatchEmbedding& pe, const SecretKey& key,
                                      const Image& img, double tol, unsigned threads = 1);

}  // namespace patchcrypt
