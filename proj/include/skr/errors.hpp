#pragma once

#include <stdexcept>
#include <string>

namespace skr {

/// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent dataset files.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or argument value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared in a computed value.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace skr
