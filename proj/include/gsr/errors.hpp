#pragma once

#include <stdexcept>
#include <string>

namespace gsr {

// Bad user-facing input: invalid flags, out-of-domain parameters, requests the
// solver cannot even start on.
class config_error : public std::invalid_argument {
 public:
  explicit config_error(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical breakdown after a computation started: ill-conditioned linear
// systems, non-convergent series or iterations, censored simulations.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gsr
