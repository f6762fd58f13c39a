#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace iftflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A point passed by reference. Accepts a VectorXd or a (strided) matrix row,
// e.g. `locations.row(i).transpose()`, without copying.
using PointRef = Eigen::Ref<const Eigen::VectorXd, 0, Eigen::InnerStride<>>;

class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative solver ran out of iterations. Carries the last iterate and its
/// fixed-point residual so callers can decide whether to accept it anyway.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Vector last_iterate, double residual)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}

  const Vector& last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }

 private:
  Vector last_iterate_;
  double residual_;
};

/// A step produced a non-finite location or weight.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step)
      : std::runtime_error(what), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Every weight underflowed to zero.
class DegenerateStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace iftflow
