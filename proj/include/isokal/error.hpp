#pragma once

#include <stdexcept>
#include <string>

namespace isokal {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model description. `path()` names the offending field, e.g.
/// "/dynamics/A_seq/3".
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Shapes of the operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A step index lies outside the data an LTV model carries.
class HorizonError : public Error {
 public:
  using Error::Error;
};

/// A factorization failed: a matrix that must be SPD or invertible is not,
/// numerically.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// The operation needs an observable model.
class NotObservableError : public Error {
 public:
  using Error::Error;
};

}  // namespace isokal
