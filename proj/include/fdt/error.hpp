#pragma once

#include <stdexcept>
#include <string>

namespace fdt {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

// Bad input: malformed graphs, role assignments, datasets, flags.
class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

class GraphError : public ValidationError {
 public:
  using ValidationError::ValidationError;
  const char* kind() const noexcept override { return "graph"; }
};

// Numerical or statistical failure on otherwise valid input.
class StatisticalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "statistical"; }
};

class FitError : public StatisticalError {
 public:
  using StatisticalError::StatisticalError;
  const char* kind() const noexcept override { return "fit"; }
};

class PositivityError : public StatisticalError {
 public:
  using StatisticalError::StatisticalError;
  const char* kind() const noexcept override { return "positivity"; }
};

}  // namespace fdt
