/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_ERRORS_HPP
#define MGLIFT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mglift {

// Invalid or inconsistent configuration/topology/weights.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: divergence, non-Hurwitz input, iteration breakdown.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// File-system and serialization failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Process exit codes used by the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitIo = 4,
};

}  // namespace mglift

#endif  // MGLIFT_ERRORS_HPP
