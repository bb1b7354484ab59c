#pragma once

#include <stdexcept>
#include <string>

namespace pmnet {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input vector length does not match the network's input layer.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Bayes' rule with a zero marginal likelihood.
class ImpossibleDataError : public Error {
 public:
  using Error::Error;
};

// Malformed structured-text document. `field()` names the offending path.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace pmnet
