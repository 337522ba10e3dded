#pragma once

#include <stdexcept>
#include <string>

namespace dvae {

// All library failures are thrown as one of the types below so callers can
// distinguish contract violations (shape/domain) from environment problems (io).

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotScalarError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptySequenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LengthMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VersionMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorruptChecksumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown by the training loop when a batch produces a non-finite loss.
struct NonFiniteLossError : std::runtime_error {
  int batch_index;
  explicit NonFiniteLossError(int batch, const std::string& what)
      : std::runtime_error(what), batch_index(batch) {}
};

}  // namespace dvae
