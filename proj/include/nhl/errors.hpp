#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace nhl {

// All library failures carry a stable machine-readable code ("DuplicateClassIndex",
// "ShapeMismatch", ...) next to the human message. The CLI maps ValidationError to
// exit code 1 and IoError to exit code 2.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nhl
