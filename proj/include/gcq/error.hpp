#pragma once

#include <stdexcept>
#include <string>

namespace gcq {

// Every hard error raised by the library derives from Error so the CLI can
// turn it into a one-line diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

// A checkpoint was produced under a different road, dynamics, observation
// or reward configuration than the one it is being used with.
class DigestMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace gcq
