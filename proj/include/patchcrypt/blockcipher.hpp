// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "patchcrypt/image.hpp"
#include "patchcrypt/keyschedule.hpp"

namespace patchcrypt {

/// Non-overlapping P x P grid over an image. Construction fails with
/// GeometryError unless both dimensions are multiples of P.
class BlockGeometry {
 public:
  BlockGeometry(std::size_t width, std::size_t height, std::size_t patch_size);
  BlockGeometry(const Image& img, std::size_t patch_size)
      : BlockGeometry(img.width(), img.height(), patch_size) {}

  std::size_t patch_size() const noexcept { return patch_; }
  std::size_t blocks_x() const noexcept { return blocks_x_; }
  std::size_t blocks_y() const noexcept { return blocks_y_; }
  std::size_t block_count() const noexcept { return blocks_x_ * blocks_y_; }
  /// 3 * P * P.
  std::size_t block_values() const noexcept { return Image::kChannels * patch_ * patch_; }

 private:
  std::size_t patch_;
  std::size_t blocks_x_;
  std::size_t blocks_y_;
};

// Canonical block order is channel-major:
//   flat[c*P*P + r*P + s] = pixel(by*P + r, bx*P + s, channel c)
// which is also the column order of the patch-embedding weight.
std::vector<std::uint8_t> flatten_block(const Image& img, std::size_t bx,
                                        std::size_t by, std::size_t patch_size);
void unflatten_block(Image& img, std::size_t bx, std::size_t by,
                     std::size_t patch_size, std::span<const std::uint8_t> flat);

/// out_flat[i] = in_flat[perm[i]] in every block. perm.size() must be 3*P*P.
Image permute_blocks(const Image& img, const Permutation& perm, std::size_t patch_size);

/// Block-wise encryption with sigma = generate_permutation(key, 3*P*P).
Image encrypt_image(const Image& img, const SecretKey& key, std::size_t patch_size);

/// Inverse of encrypt_image for the same key and patch size.
Image decrypt_image(const Image& img, const SecretKey& key, std::size_t patch_size);

}  // namespace patchcrypt
