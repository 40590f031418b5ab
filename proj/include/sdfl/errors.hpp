#pragma once

#include <stdexcept>
#include <string>

namespace sdfl {

/// Bad invocation or configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, malformed, or inconsistent data (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sdfl
