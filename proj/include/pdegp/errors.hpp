#pragma once

#include <stdexcept>
#include <string>

namespace pdegp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatches, points outside a domain, etc.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Request for something the implementation deliberately does not support.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Singular systems, failed factorizations, non-finite results.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Gram matrix that stays indefinite after the full jitter ladder.
class ConditioningError : public NumericalError {
 public:
  ConditioningError(const std::string& what, double min_eigenvalue)
      : NumericalError(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// Invalid experiment configuration. `path` is the JSON pointer of the field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace pdegp
