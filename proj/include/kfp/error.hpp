#pragma once

#include <stdexcept>
#include <string>

namespace kfp {

/// Invalid user input: bad parameters, malformed config, violated model assumptions.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure could not deliver its contract (singular step, no convergence, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kfp
