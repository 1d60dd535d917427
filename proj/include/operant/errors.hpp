#pragma once

#include <stdexcept>
#include <string>

namespace operant {

// Error taxonomy used across the library.  Catch sites distinguish four kinds:
//  - ConfigError:    a request that can never be satisfied (bad sizes, unknown
//                    keys, out-of-range knobs).  Caller bug, fail fast.
//  - ShapeError:     dimension mismatch between tensors that should agree.
//  - DataError:      well-formed request against ill-formed data (missing
//                    targets, malformed files, points outside the sensor hull).
//  - NumericalError: the math itself failed (non-PSD covariance, non-finite
//                    intermediates, CFL violation, blow-up).

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace operant
