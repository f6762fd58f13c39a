#pragma once

#include "iftflow/kernels.hpp"
#include "iftflow/measures.hpp"

namespace iftflow {

/// Squared MMD between two weighted measures, full quadratic form
/// a^T K_XX a - 2 a^T K_XY b + b^T K_YY b, clamped at zero.
double mmd_squared(const GaussianKernel& kernel, const ParticleMeasure& mu, const ParticleMeasure& nu);

/// MMD energy against a fixed empirical target pi = (1/m) sum_j delta_{y_j}.
///
/// mmd_squared() returns the full MMD^2, not F = MMD^2/2; the factor 1/2 lives
/// in the flow step sizes. witness() is the first variation of F,
/// w(z) = sum_i a_i k(x_i, z) - (1/m) sum_j k(y_j, z), and witness_gradient() its
/// spatial gradient, the drift of every transport step.
class MmdEnergy {
 public:
  /// Throws InvalidInputError unless `target` is a probability measure with uniform weights.
  MmdEnergy(GaussianKernel kernel, ParticleMeasure target);

  const GaussianKernel& kernel() const noexcept { return kernel_; }
  const ParticleMeasure& target() const noexcept { return target_; }
  Eigen::Index target_size() const noexcept { return target_.size(); }

  /// b^T K_YY b, computed once.
  double target_self_term() const noexcept { return target_self_term_; }

  double mmd_squared(const ParticleMeasure& mu) const;

  /// Same quantity from precomputed K(X, X) and K(X, Y).
  double mmd_squared_from_grams(const Matrix& kxx, const Matrix& kxy, const Vector& weights) const;

  double witness(const ParticleMeasure& mu, PointRef z) const;
  Vector witness_gradient(const ParticleMeasure& mu, PointRef z) const;

  /// Batched forms over the rows of `queries`.
  Vector witness_values(const ParticleMeasure& mu, const Matrix& queries) const;
  Matrix witness_gradient_field(const ParticleMeasure& mu, const Matrix& queries) const;

  /// Drift from kernel matrices already evaluated at the query points:
  /// kqx = K(Q, X) and kqy = K(Q, Y). Row i is the witness gradient at queries.row(i).
  Matrix witness_gradient_from_grams(const ParticleMeasure& mu, const Matrix& queries,
                                     const Matrix& kqx, const Matrix& kqy) const;

 private:
  void check_dim(Eigen::Index d) const;

  GaussianKernel kernel_;
  ParticleMeasure target_;
  double target_self_term_;
};

}  // namespace iftflow
