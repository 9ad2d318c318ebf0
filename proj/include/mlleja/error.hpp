#pragma once

#include <stdexcept>
#include <string>

namespace mlleja {

// Raised when a numerical procedure cannot produce a trustworthy result
// (singular systems, non-convergence, indefinite covariances).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A forward model failed or returned non-finite output at a specific node.
class ModelEvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mlleja
