#pragma once

#include <stdexcept>
#include <string>

namespace genza {

/// Raised when an input violates a type invariant or a schema. `field()` names
/// the offending field path (e.g. "model.n_heads").
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Base class for failures of the performance model itself (as opposed to bad
/// input), e.g. a workload that cannot be placed even with offload.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "model"; }
};

class OutOfMemoryError : public ModelError {
 public:
  using ModelError::ModelError;
  const char* kind() const noexcept override { return "oom"; }
};

class UnsupportedError : public ModelError {
 public:
  using ModelError::ModelError;
  const char* kind() const noexcept override { return "unsupported"; }
};

}  // namespace genza
