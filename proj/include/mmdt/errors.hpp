#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmdt {

/** Base class of every error raised by the library. */
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** Invalid solver configuration or incompatible options. */
class ConfigError : public Error {
 public:
  using Error::Error;
};

/** Bad input data: non-finite values, label out of range, empty sets. */
class DataError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

/** Malformed text input; carries the 1-based line number when known. */
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : DataError(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/** A dense object would exceed the configured memory budget. */
class BudgetError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmdt
