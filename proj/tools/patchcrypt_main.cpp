// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <iostream>

#include "patchcrypt/cli.hpp"

int main(int argc, char** argv) {
  std::optional<std::string> env_key;
  if (const char* v = std::getenv(patchcrypt::cli::kKeyEnvVar)) env_key = v;
  return patchcrypt::cli::run({argv, argv + argc}, {std::cout, std::cerr, env_key});
}
