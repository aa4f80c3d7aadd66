#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace markovcp {

/// Invalid inputs or contract violations. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Work would exceed a configured cap. CLI exit code 2.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failures. CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file content, carrying the source location.
class ParseError : public ValidationError {
 public:
  ParseError(std::string file, std::size_t line, std::size_t column, const std::string& message)
      : ValidationError(file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                        message),
        file_(std::move(file)),
        line_(line),
        column_(column) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::string file_;
  std::size_t line_;
  std::size_t column_;
};

}  // namespace markovcp
