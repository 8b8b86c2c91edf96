#pragma once

#include <stdexcept>
#include <string>

namespace qtele {

/// An input value violates a documented invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A run or component configuration is inconsistent or out of range.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A source calibration landed outside the supported small-gain regime.
class CalibrationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An operation was asked to do something its preconditions rule out.
class LogicError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace qtele
