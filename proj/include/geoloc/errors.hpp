#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geoloc {

/// Bad or missing input data. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A corpus line that could not be turned into a record.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite values or a failed numerical routine. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelLoadError : public DataError {
 public:
  enum class Kind { io, bad_magic, version, truncated, checksum, format };
  ModelLoadError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace geoloc
