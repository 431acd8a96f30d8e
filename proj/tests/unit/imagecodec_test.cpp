// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>
#include <string>

#include "patchcrypt/image.hpp"
#include "test_support.hpp"

namespace patchcrypt {
namespace {

std::vector<std::uint8_t> bytes(const std::string& header, std::vector<std::uint8_t> body = {}) {
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

ImageFormatError::Kind ppm_error_kind(const std::vector<std::uint8_t>& data) {
  try {
    read_ppm(data);
  } catch (const ImageFormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no ImageFormatError thrown";
  return ImageFormatError::Kind::kBadHeader;
}

TEST(ReadPpm, SinglePixel) {
  Image img = read_ppm(bytes("P6 1 1 255\n", {10, 20, 30}));
  EXPECT_EQ(img.width(), 1u);
  EXPECT_EQ(img.height(), 1u);
  EXPECT_EQ(img.at(0, 0, 0), 10);
  EXPECT_EQ(img.at(0, 0, 1), 20);
  EXPECT_EQ(img.at(0, 0, 2), 30);
}

TEST(ReadPpm, HeaderCommentsAndWhitespace) {
  Image img = read_ppm(bytes("P6\n# made by hand\n2\t1 # trailing\n255\n", {1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(img.width(), 2u);
  EXPECT_EQ(img.at(0, 1, 2), 6);
}

TEST(ReadPpm, DistinctErrors) {
  using K = ImageFormatError::Kind;
  EXPECT_EQ(ppm_error_kind(bytes("P5 1 1 255\n", {0})), K::kBadMagic);
  EXPECT_EQ(ppm_error_kind(bytes("P3 1 1 255\n", {0, 0, 0})), K::kBadMagic);
  EXPECT_EQ(ppm_error_kind(bytes("")), K::kBadMagic);
  EXPECT_EQ(ppm_error_kind(bytes("P6 1 1 65535\n", {0, 0, 0, 0, 0, 0})), K::kUnsupportedMaxval);
  EXPECT_EQ(ppm_error_kind(bytes("P6 1 1 15\n", {0, 0, 0})), K::kUnsupportedMaxval);
  EXPECT_EQ(ppm_error_kind(bytes("P6 2 2 255\n", {0, 0, 0})), K::kTruncated);
  EXPECT_EQ(ppm_error_kind(bytes("P6 99999999999 1 255\n")), K::kDimensionOverflow);
  EXPECT_EQ(ppm_error_kind(bytes("P6 4000000 4000000 255\n")), K::kDimensionOverflow);
  EXPECT_EQ(ppm_error_kind(bytes("P6 x 1 255\n")), K::kBadHeader);
  EXPECT_EQ(ppm_error_kind(bytes("P6 0 1 255\n")), K::kBadHeader);
  EXPECT_EQ(ppm_error_kind(bytes("P6 1 1 255")), K::kTruncated);
}

TEST(ReadPpm, EveryTruncationIsAnError) {
  std::mt19937_64 rng(3);
  auto full = write_ppm(testing::random_image(rng, 5, 4));
  for (std::size_t len = 0; len < full.size(); ++len) {
    std::vector<std::uint8_t> prefix(full.begin(), full.begin() + len);
    EXPECT_THROW(read_ppm(prefix), ImageFormatError) << "prefix length " << len;
  }
}

TEST(WritePpm, CanonicalHeader) {
  auto out = write_ppm(Image(1, 1));
  const std::string header = "P6\n1 1\n255\n";
  ASSERT_EQ(header.size(), 11u);
  ASSERT_EQ(out.size(), header.size() + 3);
  EXPECT_EQ(std::string(out.begin(), out.begin() + 11), header);
  EXPECT_EQ(out[11], 0);
  EXPECT_EQ(out[13], 0);
  EXPECT_EQ(write_ppm(Image(1, 1)), out);
}

TEST(WritePpm, ByteRoundTripOnCanonicalInput) {
  auto canonical = bytes("P6\n2 1\n255\n", {9, 8, 7, 6, 5, 4});
  EXPECT_EQ(write_ppm(read_ppm(canonical)), canonical);
}

TEST(Netpbm, RandomRoundTrips) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> dim(1, 64);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t w = dim(rng);
    const std::size_t h = dim(rng);
    Image img = testing::random_image(rng, w, h);
    auto encoded = write_ppm(img);
    ASSERT_EQ(read_ppm(encoded), img);
    ASSERT_EQ(write_ppm(read_ppm(encoded)), encoded);

    std::vector<std::uint8_t> labels(w * h);
    for (auto& v : labels) v = static_cast<std::uint8_t>(rng());
    LabelMap lm(w, h, labels);
    auto pgm = write_pgm_labels(lm);
    ASSERT_EQ(read_pgm_labels(pgm), lm);
    ASSERT_EQ(write_pgm_labels(read_pgm_labels(pgm)), pgm);
  }
}

TEST(ReadPgm, ZerosAndIgnorePassthrough) {
  LabelMap zeros = read_pgm_labels(bytes("P5\n2 2\n255\n", {0, 0, 0, 0}));
  EXPECT_EQ(zeros, LabelMap(2, 2));
  LabelMap ignore = read_pgm_labels(bytes("P5\n2 1\n255\n", {255, 3}));
  EXPECT_EQ(ignore.labels()[0], LabelMap::kIgnoreLabel);
  EXPECT_EQ(ignore.labels()[1], 3);
  EXPECT_THROW(read_pgm_labels(bytes("P6\n1 1\n255\n", {0, 0, 0})), ImageFormatError);
  EXPECT_THROW(read_pgm_labels(bytes("P5\n2 2\n255\n", {0, 0, 0})), ImageFormatError);
}

TEST(Image, ConstructorValidatesSize) {
  EXPECT_THROW(Image(0, 1), InvalidArgument);
  EXPECT_THROW(Image(2, 2, std::vector<std::uint8_t>(11)), InvalidArgument);
  EXPECT_THROW(LabelMap(2, 2, std::vector<std::uint8_t>(3)), InvalidArgument);
}

}  // namespace
}  // namespace patchcrypt
