#pragma once

#include <stdexcept>
#include <string>

namespace selrev {

// Error taxonomy mirrors the CLI exit codes:
//   ValidationError -> 1 (bad configuration or argument contract)
//   DataError       -> 2 (unreadable, malformed or inconsistent input files)
//   InternalError   -> 3 (a library invariant failed to hold)

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace selrev
