// SPDX-License-Identifier: Apache-2.0
#include "patchcrypt/keyschedule.hpp"

#include <sys/random.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <numeric>

#include "patchcrypt/error.hpp"

namespace patchcrypt {
namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string SecretKey::hex() const {
  std::string out;
  out.reserve(kSize * 2);
  for (std::uint8_t b : bytes_) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0f]);
  }
  return out;
}

SecretKey keygen() {
  SecretKey::Bytes bytes{};
  std::size_t filled = 0;
  while (filled < bytes.size()) {
    ssize_t got = ::getrandom(bytes.data() + filled, bytes.size() - filled, 0);
    if (got < 0) {
      if (errno == EINTR) continue;
      throw EntropyError(std::string("OS entropy source unavailable: ") +
                         std::strerror(errno));
    }
    filled += static_cast<std::size_t>(got);
  }
  return SecretKey(bytes);
}

SecretKey parse_key(std::string_view hex) {
  if (hex.size() != SecretKey::kSize * 2) {
    throw KeyParseError("key must be 64 hex characters, got " +
                            std::to_string(hex.size()),
                        hex.size());
  }
  SecretKey::Bytes bytes{};
  for (std::size_t i = 0; i < hex.size(); ++i) {
    int v = hex_value(hex[i]);
    if (v < 0) {
      throw KeyParseError(
          "invalid hex digit at position " + std::to_string(i), i);
    }
    bytes[i / 2] = static_cast<std::uint8_t>(i % 2 == 0 ? v << 4 : bytes[i / 2] | v);
  }
  return SecretKey(bytes);
}

SecretKey parse_key_file(std::string_view contents) {
  if (contents.ends_with("\r\n")) {
    contents.remove_suffix(2);
  } else if (contents.ends_with('\n')) {
    contents.remove_suffix(1);
  }
  return parse_key(contents);
}

std::uint64_t derive_seed(const SecretKey& key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : key.bytes()) {
    h ^= b;
    h *= 0x00000100000001b3ULL;
  }
  return h;
}

std::pair<std::uint64_t, PrngState> prng_next(PrngState s) {
  s.state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s.state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return {z ^ (z >> 31), s};
}

Permutation::Permutation(std::vector<Index> forward)
    : forward_(std::move(forward)) {
  std::vector<bool> seen(forward_.size(), false);
  for (std::size_t i = 0; i < forward_.size(); ++i) {
    Index v = forward_[i];
    if (v >= forward_.size() || seen[v]) {
      throw InvalidArgument("not a permutation: entry " + std::to_string(i) +
                            " = " + std::to_string(v));
    }
    seen[v] = true;
  }
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<Index> fwd(n);
  std::iota(fwd.begin(), fwd.end(), Index{0});
  return Permutation(std::move(fwd), Unchecked{});
}

bool Permutation::is_identity() const noexcept {
  for (std::size_t i = 0; i < forward_.size(); ++i) {
    if (forward_[i] != i) return false;
  }
  return true;
}

Permutation generate_permutation(const SecretKey& key, std::size_t n) {
  if (n == 0) throw InvalidArgument("permutation length must be positive");
  std::vector<Permutation::Index> fwd(n);
  std::iota(fwd.begin(), fwd.end(), Permutation::Index{0});
  PrngState state{derive_seed(key)};
  for (std::size_t i = n - 1; i >= 1; --i) {
    auto [r, next] = prng_next(state);
    state = next;
    std::swap(fwd[i], fwd[r % (i + 1)]);
  }
  return Permutation(std::move(fwd), Permutation::Unchecked{});
}

Permutation invert(const Permutation& p) {
  std::vector<Permutation::Index> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    inv[p[i]] = static_cast<Permutation::Index>(i);
  }
  return Permutation(std::move(inv), Permutation::Unchecked{});
}

Permutation compose(const Permutation& outer, const Permutation& inner) {
  if (outer.size() != inner.size()) {
    throw InvalidArgument("cannot compose permutations of sizes " +
                          std::to_string(outer.size()) + " and " +
                          std::to_string(inner.size()));
  }
  std::vector<Permutation::Index> out(inner.size());
  for (std::size_t i = 0; i < inner.size(); ++i) out[i] = outer[inner[i]];
  return Permutation(std::move(out), Permutation::Unchecked{});
}

}  // namespace patchcrypt
