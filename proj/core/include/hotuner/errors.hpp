#pragma once

#include <stdexcept>
#include <string>

namespace hotuner {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A structurally invalid object: bad dimensions, out-of-range lag
/// references, malformed plant descriptions, and the like.
class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

/// A bad argument to an operation (empty window, non-positive horizon, ...).
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

/// Failure to parse an input file (CSV trace/regressor data, JSON).
/// Messages carry "<file>:<line>: <what>" where a line is known.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A parsed config that is syntactically fine but semantically unusable:
/// unknown algorithm names, duplicate labels, missing required fields.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The regressor window has no measurable excitation (ε = 0 after
/// normalization), so no decay certificate can be computed.
class NotPersistentlyExcitingError : public Error {
 public:
  using Error::Error;
};

/// Run artifacts that cannot be compared (different θ* or horizon).
class IncompatibleRunsError : public Error {
 public:
  using Error::Error;
};

/// A plot quantity the trace does not carry (e.g. the Lyapunov value of a
/// plain gradient-descent run).
class UnavailableQuantityError : public Error {
 public:
  using Error::Error;
};

/// A simulated signal or tuner iterate left the representable range
/// (NaN/Inf). Carries which stage diverged and at which step.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& stage, long k)
      : Error("divergence in " + stage + " at step k=" + std::to_string(k)),
        stage_(stage),
        k_(k) {}

  const std::string& stage() const noexcept { return stage_; }
  long step() const noexcept { return k_; }

 private:
  std::string stage_;
  long k_;
};

}  // namespace hotuner
