#pragma once

#include <stdexcept>
#include <string>

namespace ncdn {

// Bad input: malformed files, invariant violations, inconsistent configs.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The numerical engine could not produce a trustworthy answer.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ncdn
