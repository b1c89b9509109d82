#ifndef WSOL_ERROR_HPP_
#define WSOL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace wsol {

/// Raised when an operation receives arguments that violate its preconditions
/// (inverted boxes, shape mismatches, mismatched batch lengths, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for inconsistent or unusable configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised while reading datasets, index files, images or checkpoints.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wsol

#endif  // WSOL_ERROR_HPP_
