#pragma once

#include <stdexcept>
#include <string>

namespace dtdl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data: bad CSV rows, inconsistent shapes, gaps.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value or a singular system.
class NumericError : public Error {
 public:
  NumericError(std::string block, const std::string& what)
      : Error(block + ": " + what), block_(std::move(block)) {}

  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

}  // namespace dtdl
