#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pidon {

/// Array or vector dimensions disagree with what an operation expects.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A two-branch operator was called without its second input, or vice versa.
class ArityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Jet order outside the supported range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Division by a quantity whose leading coefficient is zero.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A differentiable variable was used with a tape it was not recorded on.
class TapeMismatchError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Mixed partial derivatives are not provided by the single-seed jets.
class UnsupportedFeatureError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid or unknown run / problem configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Covariance matrix stayed indefinite after jitter escalation.
class DegenerateGridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit integrator step size collapsed; the system is probably stiff.
class StiffnessSuspectedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Newton iteration of an implicit scheme failed to converge.
class NewtonFailureError : public std::runtime_error {
 public:
  NewtonFailureError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Gradient component that is NaN or infinite.
class NonFiniteGradientError : public std::runtime_error {
 public:
  NonFiniteGradientError(const std::string& what, std::size_t index)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Training produced a non-finite loss. Parameters hold the last finite state.
class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(const std::string& what, long iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

/// Rollout prediction blew up or became non-finite in some window.
class RolloutDivergedError : public std::runtime_error {
 public:
  RolloutDivergedError(const std::string& what, int window)
      : std::runtime_error(what), window_(window) {}
  int window() const { return window_; }

 private:
  int window_;
};

/// Relative error against an all-zero reference.
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Checkpoint or field file failed validation.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pidon
