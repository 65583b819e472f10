#pragma once

#include <stdexcept>
#include <string>

namespace indiff {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A nonlinear solve exhausted its iteration budget or left the representable range.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

class StabilizationMissing : public Error {
 public:
  using Error::Error;
};

class MultiAssetUnsupported : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class NotBinomial : public Error {
 public:
  using Error::Error;
};

class InvalidParams : public Error {
 public:
  using Error::Error;
};

class InvalidTree : public Error {
 public:
  using Error::Error;
};

class InvalidUtility : public Error {
 public:
  using Error::Error;
};

/// An exponent left the double range; `argument` is the offending q.
class Overflow : public Error {
 public:
  Overflow(const std::string& what, double argument) : Error(what), argument_(argument) {}
  double argument() const noexcept { return argument_; }

 private:
  double argument_;
};

/// Bad or unreadable configuration. Carries the file and, when known, the line.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string file = {}, int line = 0)
      : Error(format(what, file, line)), file_(std::move(file)), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& what, const std::string& file, int line) {
    if (file.empty()) return what;
    if (line > 0) return file + ":" + std::to_string(line) + ": " + what;
    return file + ": " + what;
  }

  std::string file_;
  int line_;
};

}  // namespace indiff
