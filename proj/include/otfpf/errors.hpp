#pragma once

#include <stdexcept>
#include <string>

namespace otfpf {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (dimension mismatch, missing key, ...).
// The message names the offending key path when it comes from a config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A covariance that must be positive definite is (numerically) singular.
// Callers that can handle rank deficiency should switch to the singular
// gain solver / singular filter variant.
class SingularCovariance : public Error {
 public:
  using Error::Error;
};

// A state became non-finite or a covariance lost positive semidefiniteness;
// usually means the step size is too large.
class NumericalBlowup : public Error {
 public:
  using Error::Error;
};

// The algebraic Riccati iteration failed to converge or produced an
// unstable closed loop; the system is likely not detectable/stabilizable.
class AREDivergence : public Error {
 public:
  using Error::Error;
};

// The kernel-kernel block of a singular Lyapunov system did not vanish.
// Analytically it always does, so this signals a rank-estimation failure.
class InconsistentSingularSystem : public Error {
 public:
  using Error::Error;
};

}  // namespace otfpf
