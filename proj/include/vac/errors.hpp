#pragma once

#include <stdexcept>
#include <string>

namespace vac {

/// Invalid configuration or usage. The CLI maps this to exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A curriculum whose integerized segments would be empty.
class InfeasibleScheduleError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Failures while running (I/O, numerics, calibration). Exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

/// NaN/Inf in a tensor or loss.
class NumericalError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class CalibrationError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace vac
