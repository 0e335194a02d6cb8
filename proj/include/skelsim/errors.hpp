#pragma once

#include <stdexcept>
#include <string>

namespace skelsim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  int line = 0;
  std::string key;
  ConfigError(const std::string& msg, int line_ = 0, std::string key_ = {})
      : Error(line_ > 0 ? "line " + std::to_string(line_) + ": " + msg : msg),
        line(line_), key(std::move(key_)) {}
};

struct IntegrationError : Error {
  double residual;
  IntegrationError(const std::string& msg, double r) : Error(msg + " (residual " + std::to_string(r) + ")"), residual(r) {}
};

struct DegenerateSiteError : Error { using Error::Error; };
struct UnboundedRootError : Error { using Error::Error; };
struct NumericBlowupError : Error { using Error::Error; };
struct InvalidHError : Error { using Error::Error; };
struct UnsupportedError : Error { using Error::Error; };
struct OutOfRangeError : Error { using Error::Error; };
struct UnknownNameError : Error { using Error::Error; };

struct NonConvergenceError : Error {
  double residual;
  int iterations;
  NonConvergenceError(const std::string& msg, double r, int it)
      : Error(msg + " after " + std::to_string(it) + " sweeps, residual " + std::to_string(r)),
        residual(r), iterations(it) {}
};

// thrown from inside a replica when a rate exceeds its thinning bound
struct ThinningBoundViolation : Error {
  double rate, bound;
  ThinningBoundViolation(double r, double b)
      : Error("rate " + std::to_string(r) + " exceeds thinning bound " + std::to_string(b)), rate(r), bound(b) {}
};

}  // namespace skelsim
