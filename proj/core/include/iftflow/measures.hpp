#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "iftflow/types.hpp"

namespace iftflow {

/// Weights below this are clamped to exactly zero; the atom is then "vanished"
/// but stays in the state so mass can flow back to it.
inline constexpr double kVanishThreshold = 1e-15;

/// Tolerance on |sum(weights) - 1| for measures flagged as probability measures.
inline constexpr double kSimplexTolerance = 1e-12;

/// Weighted atom cloud sum_i w_i delta_{x_i}. Locations are the rows of an n x d
/// matrix. Immutable: the with_* methods return modified copies.
class ParticleMeasure {
 public:
  /// Validates: n >= 1, finite locations, finite nonnegative weights, and
  /// |sum - 1| <= kSimplexTolerance when `probability` is set.
  ParticleMeasure(Matrix locations, Vector weights, bool probability = true);

  Eigen::Index size() const noexcept { return locations_.rows(); }
  Eigen::Index dim() const noexcept { return locations_.cols(); }
  const Matrix& locations() const noexcept { return locations_; }
  const Vector& weights() const noexcept { return weights_; }
  bool is_probability() const noexcept { return probability_; }

  bool vanished(Eigen::Index i) const { return weights_(i) == 0.0; }
  Eigen::Index vanished_count() const;

  ParticleMeasure with_locations(Matrix locations) const;
  ParticleMeasure with_weights(Vector weights) const;

  bool operator==(const ParticleMeasure& other) const;

 private:
  Matrix locations_;
  Vector weights_;
  bool probability_;
};

ParticleMeasure uniform_measure(Matrix locations);

/// Sets entries below kVanishThreshold to 0 and rescales the rest to sum to one.
Vector clamp_vanished(Vector weights);

/// Euclidean projection onto the probability simplex (sort-and-threshold).
/// Output entries are >= 0 and sum to 1 within kSimplexTolerance.
Vector simplex_project(const Vector& v);

struct GaussianTarget {
  Vector mean;
  Matrix covariance;
  bool operator==(const GaussianTarget&) const = default;
};

struct MixtureComponent {
  double weight = 1.0;
  Vector mean;
  Matrix covariance;
  bool operator==(const MixtureComponent&) const = default;
};

struct MixtureTarget {
  std::vector<MixtureComponent> components;
  bool operator==(const MixtureTarget&) const = default;
};

/// Mixture whose means and covariances are drawn once from `structure_seed`:
/// each mean has norm `mean_norm`, each covariance is A A^T + min_eigenvalue I
/// with A_ij ~ N(0, 1/dim). Components are equally weighted.
struct RandomMixtureTarget {
  int dim = 2;
  int components = 3;
  double mean_norm = 20.0;
  double min_eigenvalue = 0.5;
  std::uint64_t structure_seed = 0;
  bool operator==(const RandomMixtureTarget&) const = default;
};

struct TargetSpec {
  std::variant<GaussianTarget, MixtureTarget, RandomMixtureTarget> distribution;
  int samples = 100;

  int dim() const;
  bool operator==(const TargetSpec&) const = default;
};

/// Draws the concrete mixture behind a RandomMixtureTarget. Deterministic.
MixtureTarget realize(const RandomMixtureTarget& spec);

/// `spec.samples` i.i.d. draws with uniform weights. Bit-identical for equal seeds.
/// Throws InvalidInputError on non-PD covariances or malformed mixtures.
ParticleMeasure sample_target(const TargetSpec& spec, std::uint64_t seed);

}  // namespace iftflow
