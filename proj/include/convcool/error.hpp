#pragma once

#include <stdexcept>
#include <string>

namespace convcool {

// Base of every exception thrown by the library. The category maps onto the
// CLI exit status (config 2, solver 3, io 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace convcool
