#pragma once

#include <stdexcept>
#include <string>

namespace travelgan {

// Shape disagreement between tensors (channel mismatch, rank mismatch, ...).
class ShapeError : public std::runtime_error {
public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration value (bad image size, empty dataset, unknown key).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents (checkpoint magic, PNG decode, manifest).
class FormatError : public std::runtime_error {
public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a training step produces a non-finite loss. Carries the
// diagnostic dump the trainer assembled at the point of failure.
class TrainingAbort : public std::runtime_error {
public:
  explicit TrainingAbort(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace travelgan
