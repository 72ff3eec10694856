#pragma once

#include <stdexcept>
#include <string>

namespace hnbr {

/// Invalid arguments or inconsistent dimensions passed to a library call.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data (CSV rows, artifact files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A combinatorial or sampling budget would be exceeded.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure the library cannot recover from (e.g. a non-finite objective).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hnbr
