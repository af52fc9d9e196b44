#pragma once

#include <stdexcept>
#include <string>

namespace calibcusum {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric parameter is outside its domain (delta <= 0, non-finite input).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (length mismatch, bad record).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Time indices arrived out of order.
class SequencingError : public Error {
 public:
  using Error::Error;
};

/// Invalid chart, engine, or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A snapshot does not belong to the configuration it is resumed under.
class SnapshotMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace calibcusum
