#pragma once

#include <stdexcept>
#include <string>

namespace avmtbf {

// Bad arguments, invariant violations, malformed configuration. CLI exit 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unusable input data (files, logs, recordings). CLI exit 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A requirement that no perception quality can satisfy (masking factor zero).
class UnsatisfiableError : public ValidationError {
 public:
  explicit UnsatisfiableError(const std::string& msg) : ValidationError(msg) {}
};

}  // namespace avmtbf
