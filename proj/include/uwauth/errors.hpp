#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uwauth {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputShapeError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class MissingClassError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Raised when a loss turns non-finite. `last_finite_epoch` is the last epoch
// whose losses were all finite (0 when the very first epoch diverged).
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& what, std::size_t last_finite_epoch)
      : Error(what), last_finite_epoch_(last_finite_epoch) {}

  std::size_t last_finite_epoch() const noexcept { return last_finite_epoch_; }

 private:
  std::size_t last_finite_epoch_;
};

}  // namespace uwauth
