#pragma once

#include <stdexcept>
#include <string>

namespace sylva {

/// Base for all recoverable errors raised by the workbench.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sylva
