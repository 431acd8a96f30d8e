// SPDX-License-Identifier: Apache-2.0
#include "patchcrypt/blockcipher.hpp"

#include <string>

namespace patchcrypt {
namespace {

void check_block(const BlockGeometry& g, std::size_t bx, std::size_t by) {
  if (bx >= g.blocks_x() || by >= g.blocks_y()) {
    throw InvalidArgument("block (" + std::to_string(bx) + ", " + std::to_string(by) +
                          ") outside a " + std::to_string(g.blocks_x()) + "x" +
                          std::to_string(g.blocks_y()) + " block grid");
  }
}

// Byte offset, relative to a block's top-left pixel, of each canonical index.
std::vector<std::size_t> block_offsets(std::size_t width, std::size_t patch_size) {
  const std::size_t area = patch_size * patch_size;
  std::vector<std::size_t> offsets(Image::kChannels * area);
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    for (std::size_t r = 0; r < patch_size; ++r) {
      for (std::size_t s = 0; s < patch_size; ++s) {
        offsets[c * area + r * patch_size + s] = (r * width + s) * Image::kChannels + c;
      }
    }
  }
  return offsets;
}

}  // namespace

BlockGeometry::BlockGeometry(std::size_t width, std::size_t height, std::size_t patch_size)
    : patch_(patch_size) {
  if (patch_size == 0) throw GeometryError("patch size must be at least 1");
  if (width % patch_size != 0 || height % patch_size != 0) {
    throw GeometryError("image size " + std::to_string(width) + "x" +
                        std::to_string(height) + " is not a multiple of patch size " +
                        std::to_string(patch_size) +
                        "; both dimensions must be divisible by " +
                        std::to_string(patch_size));
  }
  blocks_x_ = width / patch_size;
  blocks_y_ = height / patch_size;
}

std::vector<std::uint8_t> flatten_block(const Image& img, std::size_t bx, std::size_t by,
                                        std::size_t patch_size) {
  BlockGeometry g(img, patch_size);
  check_block(g, bx, by);
  const std::size_t area = patch_size * patch_size;
  std::vector<std::uint8_t> flat(g.block_values());
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    for (std::size_t r = 0; r < patch_size; ++r) {
      for (std::size_t s = 0; s < patch_size; ++s) {
        flat[c * area + r * patch_size + s] =
            img.at(by * patch_size + r, bx * patch_size + s, c);
      }
    }
  }
  return flat;
}

void unflatten_block(Image& img, std::size_t bx, std::size_t by, std::size_t patch_size,
                     std::span<const std::uint8_t> flat) {
  BlockGeometry g(img, patch_size);
  check_block(g, bx, by);
  if (flat.size() != g.block_values()) {
    throw InvalidArgument("block vector has " + std::to_string(flat.size()) +
                          " values, expected " + std::to_string(g.block_values()));
  }
  const std::size_t area = patch_size * patch_size;
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    for (std::size_t r = 0; r < patch_size; ++r) {
      for (std::size_t s = 0; s < patch_size; ++s) {
        img.at(by * patch_size + r, bx * patch_size + s, c) =
            flat[c * area + r * patch_size + s];
      }
    }
  }
}

Image permute_blocks(const Image& img, const Permutation& perm, std::size_t patch_size) {
  BlockGeometry g(img, patch_size);
  if (perm.size() != g.block_values()) {
    throw InvalidArgument("permutation has " + std::to_string(perm.size()) +
                          " entries, block holds " + std::to_string(g.block_values()));
  }
  // Precomputed gather table: destination offset -> source offset.
  const auto offsets = block_offsets(img.width(), patch_size);
  std::vector<std::size_t> src(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) src[i] = offsets[perm[i]];

  Image out(img.width(), img.height());
  const std::uint8_t* in_px = img.data().data();
  std::uint8_t* out_px = out.data().data();
  const std::size_t row_stride = img.width() * Image::kChannels;
  for (std::size_t by = 0; by < g.blocks_y(); ++by) {
    for (std::size_t bx = 0; bx < g.blocks_x(); ++bx) {
      const std::size_t base = by * patch_size * row_stride + bx * patch_size * Image::kChannels;
      for (std::size_t i = 0; i < offsets.size(); ++i) {
        out_px[base + offsets[i]] = in_px[base + src[i]];
      }
    }
  }
  return out;
}

Image encrypt_image(const Image& img, const SecretKey& key, std::size_t patch_size) {
  BlockGeometry g(img, patch_size);
  return permute_blocks(img, generate_permutation(key, g.block_values()), patch_size);
}

Image decrypt_image(const Image& img, const SecretKey& key, std::size_t patch_size) {
  BlockGeometry g(img, patch_size);
  return permute_blocks(img, invert(generate_permutation(key, g.block_values())),
                        patch_size);
}

}  // namespace patchcrypt
