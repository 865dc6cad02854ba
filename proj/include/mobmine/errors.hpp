#pragma once

#include <stdexcept>
#include <string>

namespace mobmine {

// Error categories; the numeric value doubles as the CLI exit code.
enum class ErrorKind { usage = 1, data = 2, fit = 3, verify = 4 };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
  ErrorKind kind_;
};

class UsageError : public Error {
public:
  explicit UsageError(std::string msg) : Error(ErrorKind::usage, std::move(msg)) {}
};

class DataError : public Error {
public:
  explicit DataError(std::string msg) : Error(ErrorKind::data, std::move(msg)) {}
};

// Invalid distribution parameters (sigma <= 0 and friends).
class ParamDomainError : public DataError {
public:
  explicit ParamDomainError(std::string msg) : DataError(std::move(msg)) {}
};

class VerifyError : public Error {
public:
  explicit VerifyError(std::string msg) : Error(ErrorKind::verify, std::move(msg)) {}
};

}  // namespace mobmine
