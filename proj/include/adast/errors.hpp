#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adast {

/// Malformed graph description (n = 0, out-of-range endpoint, ...).
class InvalidSpec : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Graph violates a structural requirement of a weight rule.
class InvalidGraph : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConnectivityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter outside its admissible open range.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedConfiguration : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Iterative numeric routine failed; carries the last estimate it produced.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double last_estimate)
      : std::runtime_error(what), last_estimate_(last_estimate) {}
  double last_estimate() const noexcept { return last_estimate_; }

 private:
  double last_estimate_;
};

}  // namespace adast
