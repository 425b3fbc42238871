#pragma once

#include <stdexcept>
#include <string>

namespace treewave {

// Bad input: a parameter outside its documented domain.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation that should have succeeded did not (non-convergence,
// internal inconsistency between two routes, collapsed estimator).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace detail
}  // namespace treewave
