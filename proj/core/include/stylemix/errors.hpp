#pragma once

#include <stdexcept>
#include <string>

namespace stylemix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad caller input: malformed configs, shapes, ranges. The CLI maps these to
/// exit code 2 and the HTTP layer to 400.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  explicit ConfigError(const std::string& what) : ValidationError("configuration error: " + what) {}
};

class DomainError : public ValidationError {
 public:
  explicit DomainError(const std::string& what) : ValidationError("domain error: " + what) {}
};

class RangeError : public ValidationError {
 public:
  explicit RangeError(const std::string& what) : ValidationError("range error: " + what) {}
};

class InjectionError : public ValidationError {
 public:
  explicit InjectionError(const std::string& what) : ValidationError("injection error: " + what) {}
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what) : Error("integrity error: " + what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io error: " + what) {}
};

class KnittingError : public Error {
 public:
  explicit KnittingError(const std::string& what) : Error("knitting error: " + what) {}
};

}  // namespace stylemix
