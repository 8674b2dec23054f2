#pragma once

#include <stdexcept>
#include <string>

namespace usmae {

// Base for every error the library raises. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Violated precondition on an argument value.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced by an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Operation called on an object in the wrong mode (e.g. classifier on a pretraining model).
class StateError : public Error {
 public:
  using Error::Error;
};

// Metric undefined for the given input (single-class labels, missing class).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace usmae
