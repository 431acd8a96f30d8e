// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace patchcrypt::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
  kVerificationFailed = 3,
};

inline constexpr const char* kKeyEnvVar = "PATCHCRYPT_KEY";

struct Io {
  std::ostream& out;
  std::ostream& err;
  /// Value of PATCHCRYPT_KEY, if set.
  std::optional<std::string> env_key;
};

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, const Io& io);

}  // namespace patchcrypt::cli
