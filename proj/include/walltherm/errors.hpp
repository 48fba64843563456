#pragma once

#include <stdexcept>
#include <string>

namespace walltherm {

// Malformed or insufficient input data (files, schedules, weather coverage).
// The CLI maps this to its data-error exit code; programming errors use the
// standard logic_error/invalid_argument family instead.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace walltherm
