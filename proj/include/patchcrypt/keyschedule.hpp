// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace patchcrypt {

/// 256-bit secret shared by the model creator and its users. Every random
/// choice in the toolkit is derived from it.
class SecretKey {
 public:
  static constexpr std::size_t kSize = 32;
  using Bytes = std::array<std::uint8_t, kSize>;

  SecretKey() = default;
  explicit SecretKey(const Bytes& bytes) : bytes_(bytes) {}

  const Bytes& bytes() const noexcept { return bytes_; }

  /// 64 lowercase hex characters.
  std::string hex() const;

  friend bool operator==(const SecretKey&, const SecretKey&) = default;

 private:
  Bytes bytes_{};
};

/// Draws 32 bytes from the operating system CSPRNG. Throws EntropyError when
/// the source is unavailable.
SecretKey keygen();

/// Case-insensitive hex decode. Throws KeyParseError naming the position of
/// the first bad character (or the length, when it is not 64).
SecretKey parse_key(std::string_view hex);

/// Reads a key file: 64 hex characters with an optional trailing newline.
SecretKey parse_key_file(std::string_view contents);

/// FNV-1a 64 over the raw key bytes.
std::uint64_t derive_seed(const SecretKey& key);

/// SplitMix64 generator state. Plain value; copying it forks the stream.
struct PrngState {
  std::uint64_t state = 0;
};

std::pair<std::uint64_t, PrngState> prng_next(PrngState s);

/// A bijection on {0, ..., n-1}; forward()[i] is the image of i.
class Permutation {
 public:
  using Index = std::uint32_t;

  /// Throws InvalidArgument if `forward` is not a bijection.
  explicit Permutation(std::vector<Index> forward);

  static Permutation identity(std::size_t n);

  std::size_t size() const noexcept { return forward_.size(); }
  std::span<const Index> forward() const noexcept { return forward_; }
  Index operator[](std::size_t i) const { return forward_[i]; }
  bool is_identity() const noexcept;

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  struct Unchecked {};
  Permutation(std::vector<Index> forward, Unchecked)
      : forward_(std::move(forward)) {}

  std::vector<Index> forward_;

  friend Permutation generate_permutation(const SecretKey&, std::size_t);
  friend Permutation invert(const Permutation&);
  friend Permutation compose(const Permutation&, const Permutation&);
};

/// Fisher-Yates over the identity, driven by SplitMix64 seeded with
/// derive_seed(key): for i = n-1 down to 1, j = next() mod (i+1), swap(i, j).
/// Throws InvalidArgument for n == 0.
Permutation generate_permutation(const SecretKey& key, std::size_t n);

Permutation invert(const Permutation& p);

/// (outer after inner): result[i] = outer[inner[i]]. Sizes must match.
Permutation compose(const Permutation& outer, const Permutation& inner);

}  // namespace patchcrypt
