#pragma once

#include <stdexcept>
#include <string>

namespace slowfast {

// Base for every error raised by the library. The CLI maps ConfigError to
// exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user input: model definition, numeric ranges, flag values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Internal consistency failure of an exact computation.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace slowfast
