// SPDX-License-Identifier: Apache-2.0
#include "patchcrypt/image.hpp"

#include <limits>
#include <string_view>

namespace patchcrypt {
namespace {

// Largest accepted width or height; keeps width*height*3 far from overflow.
constexpr std::uint64_t kMaxDimension = 1u << 20;

void check_dims(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) {
    throw InvalidArgument("image dimensions must be positive, got " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
}

bool is_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

struct Header {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t data_offset = 0;
};

class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, std::size_t pos)
      : bytes_(bytes), pos_(pos) {}

  std::size_t pos() const { return pos_; }

  std::uint64_t read_number(std::string_view field) {
    skip_whitespace_and_comments();
    if (pos_ >= bytes_.size()) {
      throw ImageFormatError(ImageFormatError::Kind::kTruncated,
                             "header ends before " + std::string(field), pos_);
    }
    std::size_t start = pos_;
    std::uint64_t value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > std::numeric_limits<std::uint32_t>::max()) {
        throw ImageFormatError(ImageFormatError::Kind::kDimensionOverflow,
                               std::string(field) + " is too large", start);
      }
      ++pos_;
    }
    if (pos_ == start) {
      throw ImageFormatError(ImageFormatError::Kind::kBadHeader,
                             "expected a decimal " + std::string(field), start);
    }
    if (pos_ < bytes_.size() && !is_space(bytes_[pos_]) && bytes_[pos_] != '#') {
      throw ImageFormatError(ImageFormatError::Kind::kBadHeader,
                             "unexpected character after " + std::string(field), pos_);
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void skip_single_whitespace() {
    if (pos_ >= bytes_.size()) {
      throw ImageFormatError(ImageFormatError::Kind::kTruncated,
                             "header ends after maxval", pos_);
    }
    if (!is_space(bytes_[pos_])) {
      throw ImageFormatError(ImageFormatError::Kind::kBadHeader,
                             "expected whitespace after maxval", pos_);
    }
    ++pos_;
  }

 private:
  void skip_whitespace_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (is_space(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

Header parse_header(std::span<const std::uint8_t> bytes, char magic_digit,
                    std::size_t bytes_per_pixel) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != magic_digit) {
    throw ImageFormatError(ImageFormatError::Kind::kBadMagic,
                           std::string("expected magic \"P") + magic_digit + "\"", 0);
  }
  if (bytes.size() > 2 && !is_space(bytes[2]) && bytes[2] != '#') {
    throw ImageFormatError(ImageFormatError::Kind::kBadMagic,
                           "magic must be followed by whitespace", 2);
  }
  HeaderReader reader(bytes, 2);
  Header h;
  std::uint64_t width = reader.read_number("width");
  std::uint64_t height = reader.read_number("height");
  std::size_t maxval_pos = reader.pos();
  std::uint64_t maxval = reader.read_number("maxval");
  reader.skip_single_whitespace();

  if (width == 0 || height == 0) {
    throw ImageFormatError(ImageFormatError::Kind::kBadHeader,
                           "image dimensions must be positive", maxval_pos);
  }
  if (width > kMaxDimension || height > kMaxDimension) {
    throw ImageFormatError(ImageFormatError::Kind::kDimensionOverflow,
                           "image dimensions " + std::to_string(width) + "x" +
                               std::to_string(height) + " exceed the supported maximum",
                           maxval_pos);
  }
  if (maxval != 255) {
    throw ImageFormatError(ImageFormatError::Kind::kUnsupportedMaxval,
                           "unsupported maxval " + std::to_string(maxval) +
                               " (only 255 is supported)",
                           maxval_pos);
  }
  h.width = static_cast<std::size_t>(width);
  h.height = static_cast<std::size_t>(height);
  h.data_offset = reader.pos();

  std::size_t need = h.width * h.height * bytes_per_pixel;
  if (bytes.size() - h.data_offset < need) {
    throw ImageFormatError(ImageFormatError::Kind::kTruncated,
                           "pixel data truncated: need " + std::to_string(need) +
                               " bytes, have " +
                               std::to_string(bytes.size() - h.data_offset),
                           bytes.size());
  }
  return h;
}

std::vector<std::uint8_t> write_netpbm(char magic_digit, std::size_t width,
                                       std::size_t height,
                                       std::span<const std::uint8_t> raster) {
  std::string header = std::string("P") + magic_digit + "\n" + std::to_string(width) +
                       " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out;
  out.reserve(header.size() + raster.size());
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), raster.begin(), raster.end());
  return out;
}

}  // namespace

Image::Image(std::size_t width, std::size_t height)
    : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(width * height * kChannels, 0);
}

Image::Image(std::size_t width, std::size_t height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != width * height * kChannels) {
    throw InvalidArgument("image data has " + std::to_string(data_.size()) +
                          " bytes, expected " +
                          std::to_string(width * height * kChannels));
  }
}

LabelMap::LabelMap(std::size_t width, std::size_t height)
    : width_(width), height_(height) {
  check_dims(width, height);
  labels_.assign(width * height, 0);
}

LabelMap::LabelMap(std::size_t width, std::size_t height, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  check_dims(width, height);
  if (labels_.size() != width * height) {
    throw InvalidArgument("label map has " + std::to_string(labels_.size()) +
                          " entries, expected " + std::to_string(width * height));
  }
}

Image read_ppm(std::span<const std::uint8_t> bytes) {
  Header h = parse_header(bytes, '6', Image::kChannels);
  auto raster = bytes.subspan(h.data_offset, h.width * h.height * Image::kChannels);
  return Image(h.width, h.height, std::vector<std::uint8_t>(raster.begin(), raster.end()));
}

std::vector<std::uint8_t> write_ppm(const Image& img) {
  return write_netpbm('6', img.width(), img.height(), img.data());
}

LabelMap read_pgm_labels(std::span<const std::uint8_t> bytes) {
  Header h = parse_header(bytes, '5', 1);
  auto raster = bytes.subspan(h.data_offset, h.width * h.height);
  return LabelMap(h.width, h.height, std::vector<std::uint8_t>(raster.begin(), raster.end()));
}

std::vector<std::uint8_t> write_pgm_labels(const LabelMap& labels) {
  return write_netpbm('5', labels.width(), labels.height(), labels.labels());
}

}  // namespace patchcrypt
