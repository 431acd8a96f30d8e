// SPDX-License-Identifier: Apache-2.0
#include "patchcrypt/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "patchcrypt/blockcipher.hpp"

namespace patchcrypt {

Normalization Normalization::uniform(double mean, double stddev) {
  return Normalization{{mean, mean, mean}, {stddev, stddev, stddev}};
}

bool Normalization::is_uniform() const noexcept {
  return mean[0] == mean[1] && mean[1] == mean[2] && stddev[0] == stddev[1] && stddev[1] == stddev[2];
}

void Normalization::validate() const {
  for (double s : stddev) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvalidArgument("normalization stddev must be positive and finite");
    }
  }
  for (double m : mean) {
    if (!std::isfinite(m)) throw InvalidArgument("normalization mean must be finite");
  }
}

PatchEmbedding::PatchEmbedding(std::size_t patch_size, std::size_t dim,
                               std::vector<float> weight, std::vector<float> bias,
                               Normalization norm)
    : patch_(patch_size),
      dim_(dim),
      weight_(std::move(weight)),
      bias_(std::move(bias)),
      norm_(norm) {
  if (patch_ == 0 || dim_ == 0) {
    throw InvalidArgument("patch size and embedding dimension must be positive");
  }
  if (weight_.size() != dim_ * inputs()) {
    throw InvalidArgument("weight has " + std::to_string(weight_.size()) +
                          " values, expected " + std::to_string(dim_) + "x" +
                          std::to_string(inputs()) + " = " +
                          std::to_string(dim_ * inputs()));
  }
  if (bias_.size() != dim_) {
    throw InvalidArgument("bias has " + std::to_string(bias_.size()) +
                          " values, expected " + std::to_string(dim_));
  }
  norm_.validate();
}

// [D][3][P][P] flattened row-major is exactly the canonical column order, so
// both conversions are straight copies behind a shape check.
PatchEmbedding PatchEmbedding::from_conv_layout(std::span<const float> kernel,
                                                std::span<const float> bias,
                                                std::size_t patch_size, std::size_t dim,
                                                Normalization norm) {
  const std::size_t expected = dim * 3 * patch_size * patch_size;
  if (kernel.size() != expected) {
    throw InvalidArgument("conv kernel has " + std::to_string(kernel.size()) +
                          " values, expected [" + std::to_string(dim) + ",3," +
                          std::to_string(patch_size) + "," + std::to_string(patch_size) +
                          "] = " + std::to_string(expected));
  }
  return PatchEmbedding(patch_size, dim, {kernel.begin(), kernel.end()},
                        {bias.begin(), bias.end()}, norm);
}

std::vector<float> PatchEmbedding::to_conv_layout() const { return weight_; }

std::string EquivalenceReport::to_json() const {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "{\"max_abs_diff\":%.17g,\"mean_abs_diff\":%.17g,\"tokens\":%zu,\"pass\":%s}",
                max_abs_diff, mean_abs_diff, token_count, pass ? "true" : "false");
  return buf;
}

TokenGrid embed_forward(const PatchEmbedding& pe, const Image& img, unsigned threads) {
  const std::size_t P = pe.patch_size();
  BlockGeometry g(img, P);
  const std::size_t n = pe.inputs();
  const std::size_t D = pe.dim();
  const std::size_t area = P * P;

  // lut[c][x] = (x/255 - mean[c]) / stddev[c]
  std::array<std::array<double, 256>, 3> lut{};
  for (std::size_t c = 0; c < 3; ++c) {
    for (int x = 0; x < 256; ++x) {
      lut[c][x] = (static_cast<double>(x) / 255.0 - pe.norm().mean[c]) / pe.norm().stddev[c];
    }
  }
  std::vector<double> weight(pe.weight().begin(), pe.weight().end());

  TokenGrid grid{g.blocks_y(), g.blocks_x(), D, {}};
  grid.values.assign(grid.rows * grid.cols * D, 0.0);

  auto run_rows = [&](std::size_t row_begin, std::size_t row_end) {
    std::vector<double> v(n);
    for (std::size_t by = row_begin; by < row_end; ++by) {
      for (std::size_t bx = 0; bx < g.blocks_x(); ++bx) {
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t r = 0; r < P; ++r) {
            for (std::size_t s = 0; s < P; ++s) {
              v[c * area + r * P + s] = lut[c][img.at(by * P + r, bx * P + s, c)];
            }
          }
        }
        double* token = &grid.values[(by * grid.cols + bx) * D];
        for (std::size_t d = 0; d < D; ++d) {
          const double* w = &weight[d * n];
          double acc = 0.0;
          for (std::size_t i = 0; i < n; ++i) acc += w[i] * v[i];
          token[d] = acc + static_cast<double>(pe.bias()[d]);
        }
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, grid.rows);
  if (workers == 1) {
    run_rows(0, grid.rows);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (grid.rows + workers - 1) / workers;
    for (std::size_t begin = 0; begin < grid.rows; begin += chunk) {
      pool.emplace_back(run_rows, begin, std::min(grid.rows, begin + chunk));
    }
  }
  return grid;
}

PatchEmbedding adapt_embedding(const PatchEmbedding& pe, const Permutation& perm) {
  const std::size_t n = pe.inputs();
  if (perm.size() != n) {
    throw InvalidArgument("permutation has " + std::to_string(perm.size()) +
                          " entries, embedding expects " + std::to_string(n));
  }
  std::vector<float> adapted(pe.weight().size());
  for (std::size_t d = 0; d < pe.dim(); ++d) {
    for (std::size_t i = 0; i < n; ++i) adapted[d * n + i] = pe.weight_at(d, perm[i]);
  }
  return PatchEmbedding(pe.patch_size(), pe.dim(), std::move(adapted),
                        {pe.bias().begin(), pe.bias().end()}, pe.norm());
}

PatchEmbedding adapt_embedding(const PatchEmbedding& pe, const SecretKey& key) {
  return adapt_embedding(pe, generate_permutation(key, pe.inputs()));
}

EquivalenceReport compare_tokens(const TokenGrid& a, const TokenGrid& b, double tol) {
  if (a.rows != b.rows || a.cols != b.cols || a.dim != b.dim) {
    throw InvalidArgument("token grids differ in shape");
  }
  EquivalenceReport report;
  report.token_count = a.token_count();
  report.tolerance = tol;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double diff = std::abs(a.values[i] - b.values[i]);
    report.max_abs_diff = std::max(report.max_abs_diff, diff);
    sum += diff;
  }
  report.mean_abs_diff = a.values.empty() ? 0.0 : sum / static_cast<double>(a.values.size());
  // Summation error can push the mean a hair above the max; clamp keeps the invariant.
  report.mean_abs_diff = std::min(report.mean_abs_diff, report.max_abs_diff);
  report.pass = report.max_abs_diff <= tol;
  return report;
}

EquivalenceReport verify_equivariance(const PatchEmbedding& pe, const SecretKey& key,
                                      const Image& img, double tol, unsigned threads) {
  const Permutation sigma = generate_permutation(key, pe.inputs());
  TokenGrid plain = embed_forward(pe, img, threads);
  TokenGrid encrypted = embed_forward(adapt_embedding(pe, sigma),
                                      permute_blocks(img, sigma, pe.patch_size()), threads);
  return compare_tokens(plain, encrypted, tol);
}

}  // namespace patchcrypt
