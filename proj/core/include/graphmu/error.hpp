#pragma once

#include <stdexcept>
#include <string>

namespace graphmu {

/// Raised for every contract violation and malformed input in the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace graphmu
