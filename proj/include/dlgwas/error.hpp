#pragma once
// Exception hierarchy shared by every module. The CLI maps ConfigError to
// exit code 2 and DataError (and its subclasses) to exit code 3.

#include <stdexcept>
#include <string>

namespace dlgwas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Problems with the content of input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class BadMagicError : public ParseError {
 public:
  using ParseError::ParseError;
};

class TruncatedError : public ParseError {
 public:
  using ParseError::ParseError;
};

class DimensionMismatchError : public ParseError {
 public:
  using ParseError::ParseError;
};

class VersionError : public ParseError {
 public:
  using ParseError::ParseError;
};

class EncodingError : public DataError {
 public:
  using DataError::DataError;
};

// Per-SNP statistics are undefined (all-missing column).
class StatsError : public DataError {
 public:
  using DataError::DataError;
};

// A filter removed every variant.
class EmptyResultError : public DataError {
 public:
  using DataError::DataError;
};

class SingularDesignError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dlgwas
