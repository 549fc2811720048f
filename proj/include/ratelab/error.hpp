#pragma once

#include <stdexcept>
#include <string>

namespace ratelab {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { config = 2, data = 3, runtime = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct IndexError : DataError {
  using DataError::DataError;
};

/// A column (or input vector) with no spread where spread is required.
struct DegenerateError : DataError {
  using DataError::DataError;
};

/// Design matrix is rank deficient. `what()` names the dependent columns.
struct SingularDesignError : DataError {
  using DataError::DataError;
};

struct EmptyInputError : DataError {
  using DataError::DataError;
};

/// No candidate item left to recommend.
struct ExhaustionError : Error {
  explicit ExhaustionError(const std::string& what) : Error(ErrorKind::runtime, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::data, what) {}
};

}  // namespace ratelab
