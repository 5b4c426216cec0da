#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gmmamp {

// Numerical breakdown: non-positive-definite solve, negative eigenvalue in a
// matrix square root, divergence to non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iteration hit its budget without meeting its tolerance. `history` holds
// the per-iteration convergence metric so callers can inspect the tail.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what, std::vector<double> hist = {})
      : std::runtime_error(what), history(std::move(hist)) {}

  std::vector<double> history;
};

// A spinodal or free-energy crossing was requested in a regime where the
// transition is continuous and those quantities do not exist.
class NotFirstOrderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace gmmamp
