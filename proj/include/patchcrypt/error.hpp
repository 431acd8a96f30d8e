// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace patchcrypt {

// Root of every error the library throws. The CLI maps all of these to the
// data/format exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Image dimensions incompatible with the block grid.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class EntropyError : public Error {
 public:
  using Error::Error;
};

// Malformed hex key. position() is the zero-based offending character, or
// the string length when the length itself is wrong.
class KeyParseError : public Error {
 public:
  KeyParseError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace patchcrypt
