#pragma once

#include <stdexcept>
#include <string>

namespace vebs {

/// Bad or inconsistent configuration (unknown key, out-of-range value,
/// malformed schedule). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A well-posed request with no admissible answer (unreachable calibration
/// target, infeasible equilibrium, degenerate stiffness targets). Exit code 3.
class NoSolutionError : public std::runtime_error {
 public:
  explicit NoSolutionError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / stream / parse failures on user-supplied data. Exit code 4.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vebs
