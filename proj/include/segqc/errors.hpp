#pragma once

#include <stdexcept>
#include <string>

namespace segqc {

/// Bad arguments or configuration supplied by the caller. Maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, missing or inconsistent input data. Maps to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric that has no value for the given inputs (e.g. Hausdorff on an
/// empty foreground).
class UndefinedMetricError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace segqc
