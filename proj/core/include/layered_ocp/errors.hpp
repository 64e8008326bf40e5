#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace layered_ocp {

/// Bad dimensions, nonpositive parameters, malformed configurations.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization failed or produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulated state left the finite region (non-finite or beyond the guard).
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string &what, std::size_t timestep)
      : std::runtime_error(what + " (timestep " + std::to_string(timestep) + ")"),
        timestep_(timestep) {}

  std::size_t timestep() const noexcept { return timestep_; }

 private:
  std::size_t timestep_;
};

/// A per-timestep constraint set is empty.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string &what, std::size_t timestep)
      : std::runtime_error(what + " (timestep " + std::to_string(timestep) + ")"),
        timestep_(timestep) {}

  std::size_t timestep() const noexcept { return timestep_; }

 private:
  std::size_t timestep_;
};

class UnsupportedCost : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string &what, std::string path)
      : std::runtime_error(what + ": " + path), path_(std::move(path)) {}
  const std::string &path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace layered_ocp
