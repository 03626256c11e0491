#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace livsynth {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A LIV class id (or featurizer id) is not registered in the option pool.
class PoolError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Genome text could not be parsed. `position()` is a 0-based character offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " (at offset " + std::to_string(position) + ")"), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class CompileError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared inside a LIV. `layer()` is the 0-based instance index.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t layer)
      : Error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(std::size_t step)
      : Error("training diverged at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace livsynth
