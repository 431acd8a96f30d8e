// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "patchcrypt/error.hpp"

namespace patchcrypt {

/// 8-bit RGB raster, row-major, pixel-interleaved.
class Image {
 public:
  static constexpr std::size_t kChannels = 3;

  /// Zero-filled image. Throws InvalidArgument for a zero dimension.
  Image(std::size_t width, std::size_t height);
  /// Takes ownership of `data`, which must hold width*height*3 bytes.
  Image(std::size_t width, std::size_t height, std::vector<std::uint8_t> data);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  std::uint8_t at(std::size_t row, std::size_t col, std::size_t channel) const {
    return data_[(row * width_ + col) * kChannels + channel];
  }
  std::uint8_t& at(std::size_t row, std::size_t col, std::size_t channel) {
    return data_[(row * width_ + col) * kChannels + channel];
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> data_;
};

/// Per-pixel class ids; kIgnoreLabel marks pixels excluded from evaluation.
class LabelMap {
 public:
  static constexpr std::uint8_t kIgnoreLabel = 255;

  LabelMap(std::size_t width, std::size_t height);
  LabelMap(std::size_t width, std::size_t height, std::vector<std::uint8_t> labels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::span<std::uint8_t> labels() noexcept { return labels_; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> labels_;
};

class ImageFormatError : public Error {
 public:
  enum class Kind {
    kBadMagic,
    kBadHeader,
    kUnsupportedMaxval,
    kTruncated,
    kDimensionOverflow,
  };

  ImageFormatError(Kind kind, const std::string& what, std::size_t offset)
      : Error(what), kind_(kind), offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  /// Byte offset into the input where the problem was detected.
  std::size_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

// Binary netpbm: P6 for images, P5 for label maps, maxval 255 only.
// Writers emit the canonical header "P6\n<w> <h>\n255\n"; bytes after the
// declared raster are ignored by the readers.
Image read_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_ppm(const Image& img);
LabelMap read_pgm_labels(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_pgm_labels(const LabelMap& labels);

}  // namespace patchcrypt
