#pragma once

#include <stdexcept>
#include <string>

namespace latentdlm {

// Bad input: malformed data, inconsistent dimensions, out-of-range parameters.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A factorization or sampler produced something unusable mid-run.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace latentdlm
