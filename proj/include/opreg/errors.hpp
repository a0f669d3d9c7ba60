#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opreg {

/// Invalid or inconsistent configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state or loss became non-finite. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time integration produced a non-finite state.
class BlowUpError : public NumericalError {
 public:
  BlowUpError(std::size_t step, const std::string& what)
      : NumericalError(what + " (blow-up at step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Training loss became non-finite.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(int stage_p, std::size_t iteration)
      : NumericalError("training diverged at stage p=" + std::to_string(stage_p) + ", iteration " +
                       std::to_string(iteration)),
        stage_p_(stage_p),
        iteration_(iteration) {}

  int stage_p() const noexcept { return stage_p_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  int stage_p_;
  std::size_t iteration_;
};

/// File could not be read/written or violates its format. Maps to CLI exit code 4.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace opreg
