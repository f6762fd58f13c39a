#include "iftflow/energy.hpp"

#include <cmath>
#include <iostream>
#include <string>

namespace iftflow {

namespace {

constexpr double kNegativeWarnThreshold = -1e-10;

double clamp_quadratic_form(double value) {
  if (value < kNegativeWarnThreshold) {
    std::clog << "iftflow: warning: squared MMD evaluated to " << value
              << " (round-off beyond tolerance); clamping to 0\n";
  }
  return value < 0.0 ? 0.0 : value;
}

}  // namespace

double mmd_squared(const GaussianKernel& kernel, const ParticleMeasure& mu, const ParticleMeasure& nu) {
  if (mu.dim() != nu.dim()) {
    throw InvalidInputError("mmd_squared: dimension mismatch");
  }
  const Vector& a = mu.weights();
  const Vector& b = nu.weights();
  const double xx = a.dot(kernel.gram(mu.locations()) * a);
  const double xy = a.dot(kernel.gram(mu.locations(), nu.locations()) * b);
  const double yy = b.dot(kernel.gram(nu.locations()) * b);
  return clamp_quadratic_form(xx - 2.0 * xy + yy);
}

MmdEnergy::MmdEnergy(GaussianKernel kernel, ParticleMeasure target)
    : kernel_(kernel), target_(std::move(target)), target_self_term_(0.0) {
  if (!target_.is_probability()) {
    throw InvalidInputError("MmdEnergy: target must be a probability measure");
  }
  const double uniform = 1.0 / static_cast<double>(target_.size());
  if (((target_.weights().array() - uniform).abs() > kSimplexTolerance).any()) {
    throw InvalidInputError("MmdEnergy: target weights must be uniform 1/m");
  }
  const Vector& b = target_.weights();
  target_self_term_ = b.dot(kernel_.gram(target_.locations()) * b);
}

void MmdEnergy::check_dim(Eigen::Index d) const {
  if (d != target_.dim()) {
    throw InvalidInputError("MmdEnergy: dimension " + std::to_string(d) + " does not match target dimension " +
                            std::to_string(target_.dim()));
  }
}

double MmdEnergy::mmd_squared(const ParticleMeasure& mu) const {
  check_dim(mu.dim());
  return mmd_squared_from_grams(kernel_.gram(mu.locations()),
                                kernel_.gram(mu.locations(), target_.locations()), mu.weights());
}

double MmdEnergy::mmd_squared_from_grams(const Matrix& kxx, const Matrix& kxy, const Vector& weights) const {
  const double xx = weights.dot(kxx * weights);
  const double xy = weights.dot(kxy * target_.weights());
  return clamp_quadratic_form(xx - 2.0 * xy + target_self_term_);
}

double MmdEnergy::witness(const ParticleMeasure& mu, PointRef z) const {
  check_dim(mu.dim());
  check_dim(z.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    acc += mu.weights()(i) * kernel_.eval(mu.locations().row(i).transpose(), z);
  }
  const ParticleMeasure& pi = target_;
  for (Eigen::Index j = 0; j < pi.size(); ++j) {
    acc -= pi.weights()(j) * kernel_.eval(pi.locations().row(j).transpose(), z);
  }
  return acc;
}

Vector MmdEnergy::witness_gradient(const ParticleMeasure& mu, PointRef z) const {
  check_dim(mu.dim());
  check_dim(z.size());
  Vector acc = Vector::Zero(z.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    acc += mu.weights()(i) * kernel_.grad2(mu.locations().row(i).transpose(), z);
  }
  const ParticleMeasure& pi = target_;
  for (Eigen::Index j = 0; j < pi.size(); ++j) {
    acc -= pi.weights()(j) * kernel_.grad2(pi.locations().row(j).transpose(), z);
  }
  return acc;
}

Vector MmdEnergy::witness_values(const ParticleMeasure& mu, const Matrix& queries) const {
  check_dim(mu.dim());
  check_dim(queries.cols());
  return kernel_.gram(queries, mu.locations()) * mu.weights() -
         kernel_.gram(queries, target_.locations()) * target_.weights();
}

Matrix MmdEnergy::witness_gradient_field(const ParticleMeasure& mu, const Matrix& queries) const {
  check_dim(mu.dim());
  check_dim(queries.cols());
  return witness_gradient_from_grams(mu, queries, kernel_.gram(queries, mu.locations()),
                                     kernel_.gram(queries, target_.locations()));
}

Matrix MmdEnergy::witness_gradient_from_grams(const ParticleMeasure& mu, const Matrix& queries,
                                              const Matrix& kqx, const Matrix& kqy) const {
  // sum_j a_j k(x_j, q)(x_j - q) = (K_QX diag(a)) X - (K_QX a) o Q, likewise for the target.
  const Vector& a = mu.weights();
  const Vector& b = target_.weights();
  const Vector row_mass = kqx * a - kqy * b;
  Matrix field = kqx * (a.asDiagonal() * mu.locations()) - kqy * (b.asDiagonal() * target_.locations());
  field.noalias() -= row_mass.asDiagonal() * queries;
  return (2.0 * kernel_.exponent_scale()) * field;
}

}  // namespace iftflow
