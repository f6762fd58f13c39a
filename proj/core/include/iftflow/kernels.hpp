#pragma once

#include <optional>

#include "iftflow/types.hpp"

namespace iftflow {

/// Normalization of the squared distance inside the Gaussian.
///
///   kHalfInverseVariance:  k(x, y) = exp(-|x - y|^2 / (2 sigma^2))   (default)
///   kInverseVariance:      k(x, y) = exp(-|x - y|^2 / sigma^2)
///
/// Every experiment result depends on this choice through the effective
/// length scale, so it is carried in the kernel value itself.
enum class BandwidthConvention { kHalfInverseVariance, kInverseVariance };

/// Gaussian (RBF) kernel with a fixed bandwidth. Cheap to copy.
class GaussianKernel {
 public:
  explicit GaussianKernel(double bandwidth,
                          BandwidthConvention convention = BandwidthConvention::kHalfInverseVariance);

  double bandwidth() const noexcept { return bandwidth_; }
  BandwidthConvention convention() const noexcept { return convention_; }

  /// Coefficient c in k(x, y) = exp(-c |x - y|^2).
  double exponent_scale() const noexcept { return scale_; }

  double eval(PointRef x, PointRef y) const;
  double operator()(PointRef x, PointRef y) const { return eval(x, y); }

  /// Gradient with respect to the second argument,
  /// grad_z k(x, z) = 2c k(x, z) (x - z), i.e. k(x, z)(x - z)/sigma^2 under the default convention.
  Vector grad2(PointRef x, PointRef z) const;

  /// Dense Gram matrix, entry (i, j) = k(a_i, b_j); points are rows.
  Matrix gram(const Matrix& a, const Matrix& b) const;

  /// Symmetric Gram matrix of a point set with itself. The diagonal is exactly 1
  /// and (i, j) and (j, i) hold the same bits.
  Matrix gram(const Matrix& a) const;

  bool operator==(const GaussianKernel& other) const = default;

 private:
  double bandwidth_;
  BandwidthConvention convention_;
  double scale_;
};

/// Kernel matrices for one JKO iteration.
/// kxx = K(X_new, X_new), kxy = K(X_new, Y), kx_old = K(X_new, X_old).
struct GramBundle {
  Matrix kxx;
  Matrix kxy;
  Matrix kx_old;
  std::optional<Matrix> kyy;
};

GramBundle make_gram_bundle(const GaussianKernel& kernel, const Matrix& new_locations,
                            const Matrix& target_locations, const Matrix& old_locations,
                            bool with_kyy = false);

/// Smallest eigenvalue of a symmetric matrix (self-adjoint solver). Used by PSD checks.
double min_eigenvalue(const Matrix& symmetric);

}  // namespace iftflow
