#pragma once

#include <stdexcept>
#include <string>

namespace kpzss {

// Raised for invalid arguments and violated preconditions. The CLI maps
// this to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a dense-output query falls outside the integrated range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace kpzss
