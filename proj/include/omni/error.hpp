#pragma once

#include <stdexcept>
#include <string>

namespace omni {

/// Bad input: malformed files, violated preconditions, inconsistent configs.
/// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while executing a well-formed request (NaN loss, degenerate
/// warp model, I/O failure). The CLI maps this to exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace omni
