#pragma once

#include <stdexcept>
#include <string>

namespace mricap {

// Bad input: malformed config, unknown resource, violated invariant.
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: bracket does not straddle, state space over cap,
// undefined estimator. The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mricap
