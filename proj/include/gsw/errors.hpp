#pragma once

#include <stdexcept>
#include <string>

namespace gsw {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kData = 2,
  kVerification = 3,
  kNumeric = 4,
};

/// Invalid user-supplied parameter (phi out of range, bad config key, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or non-finite input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization or division failed to meet its stability threshold.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a property that must hold on the coupling's good event does
/// not. Always indicates a bug.
class InternalConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace gsw
