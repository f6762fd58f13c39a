#include "iftflow/kernels.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace iftflow {

namespace {

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double diff = a(i, k) - b(j, k);
    acc += diff * diff;
  }
  return acc;
}

void require_same_dim(Eigen::Index lhs, Eigen::Index rhs, const char* what) {
  if (lhs != rhs) {
    throw InvalidInputError(std::string(what) + ": dimension mismatch (" + std::to_string(lhs) +
                            " vs " + std::to_string(rhs) + ")");
  }
}

}  // namespace

GaussianKernel::GaussianKernel(double bandwidth, BandwidthConvention convention)
    : bandwidth_(bandwidth), convention_(convention), scale_(0.0) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InvalidInputError("GaussianKernel: bandwidth must be positive and finite");
  }
  const double var = bandwidth * bandwidth;
  scale_ = convention == BandwidthConvention::kHalfInverseVariance ? 1.0 / (2.0 * var) : 1.0 / var;
}

double GaussianKernel::eval(PointRef x, PointRef y) const {
  require_same_dim(x.size(), y.size(), "kernel eval");
  return std::exp(-scale_ * (x - y).squaredNorm());
}

Vector GaussianKernel::grad2(PointRef x, PointRef z) const {
  require_same_dim(x.size(), z.size(), "kernel grad2");
  const Vector diff = x - z;
  const double k = std::exp(-scale_ * diff.squaredNorm());
  return (2.0 * scale_ * k) * diff;
}

Matrix GaussianKernel::gram(const Matrix& a, const Matrix& b) const {
  if (a.rows() == 0 || b.rows() == 0) {
    throw InvalidInputError("gram: empty point set");
  }
  require_same_dim(a.cols(), b.cols(), "gram");
  Matrix out(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out(i, j) = std::exp(-scale_ * squared_distance(a, i, b, j));
    }
  }
  return out;
}

Matrix GaussianKernel::gram(const Matrix& a) const {
  if (a.rows() == 0) {
    throw InvalidInputError("gram: empty point set");
  }
  const Eigen::Index n = a.rows();
  Matrix out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = std::exp(-scale_ * squared_distance(a, i, a, j));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

GramBundle make_gram_bundle(const GaussianKernel& kernel, const Matrix& new_locations,
                            const Matrix& target_locations, const Matrix& old_locations,
                            bool with_kyy) {
  if (old_locations.rows() != new_locations.rows()) {
    throw InvalidInputError("make_gram_bundle: old and new location counts differ");
  }
  GramBundle bundle;
  bundle.kxx = kernel.gram(new_locations);
  bundle.kxy = kernel.gram(new_locations, target_locations);
  bundle.kx_old = kernel.gram(new_locations, old_locations);
  if (with_kyy) {
    bundle.kyy = kernel.gram(target_locations);
  }
  return bundle;
}

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace iftflow
