#pragma once

#include <stdexcept>
#include <string>

namespace deepsvm {

/// Input outside the trained domain. `axis()` names the offending coordinate.
class DomainError : public std::domain_error {
 public:
  DomainError(std::string axis, const std::string& what)
      : std::domain_error(what), axis_(std::move(axis)) {}
  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorruptCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class VersionMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class ShapeMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Training aborted (non-finite loss or gradient).
class TrainingAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace deepsvm

namespace deepsvm {

/// Non-finite loss contribution; `index()` is the point's position in its set.
class NonFiniteLossError : public NumericalError {
 public:
  NonFiniteLossError(std::string set, std::size_t index, const std::string& what)
      : NumericalError(what), set_(std::move(set)), index_(index) {}
  const std::string& set() const noexcept { return set_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::string set_;
  std::size_t index_;
};

}  // namespace deepsvm
