#pragma once

#include <stdexcept>
#include <string>

namespace kgcf {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; message carries file name and line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A non-finite value appeared; the message names the operation that produced it.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A statistic is undefined for the given input (empty split, no matched records, zero variance).
class StatisticError : public Error {
 public:
  using Error::Error;
};

// Checkpoint or artifact header does not match what the reader expects.
class VersionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace kgcf
