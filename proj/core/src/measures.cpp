#include "iftflow/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Cholesky>

namespace iftflow {

ParticleMeasure::ParticleMeasure(Matrix locations, Vector weights, bool probability)
    : locations_(std::move(locations)), weights_(std::move(weights)), probability_(probability) {
  if (locations_.rows() == 0 || locations_.cols() == 0) {
    throw InvalidInputError("ParticleMeasure: empty location set");
  }
  if (weights_.size() != locations_.rows()) {
    throw InvalidInputError("ParticleMeasure: " + std::to_string(weights_.size()) + " weights for " +
                            std::to_string(locations_.rows()) + " atoms");
  }
  if (!locations_.allFinite()) {
    throw InvalidInputError("ParticleMeasure: non-finite location");
  }
  if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
    throw InvalidInputError("ParticleMeasure: weights must be finite and nonnegative");
  }
  if (probability_ && std::abs(weights_.sum() - 1.0) > kSimplexTolerance) {
    throw InvalidInputError("ParticleMeasure: probability weights sum to " +
                            std::to_string(weights_.sum()));
  }
}

Eigen::Index ParticleMeasure::vanished_count() const {
  return (weights_.array() == 0.0).count();
}

ParticleMeasure ParticleMeasure::with_locations(Matrix locations) const {
  return ParticleMeasure(std::move(locations), weights_, probability_);
}

ParticleMeasure ParticleMeasure::with_weights(Vector weights) const {
  return ParticleMeasure(locations_, std::move(weights), probability_);
}

bool ParticleMeasure::operator==(const ParticleMeasure& other) const {
  return probability_ == other.probability_ && locations_.rows() == other.locations_.rows() &&
         locations_.cols() == other.locations_.cols() && locations_ == other.locations_ &&
         weights_ == other.weights_;
}

ParticleMeasure uniform_measure(Matrix locations) {
  const Eigen::Index n = locations.rows();
  if (n == 0) {
    throw InvalidInputError("uniform_measure: empty location set");
  }
  return ParticleMeasure(std::move(locations), Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

Vector clamp_vanished(Vector weights) {
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) < kVanishThreshold) weights(i) = 0.0;
  }
  const double total = weights.sum();
  if (total > 0.0) weights /= total;
  return weights;
}

Vector simplex_project(const Vector& v) {
  const Eigen::Index n = v.size();
  if (n == 0) {
    throw InvalidInputError("simplex_project: empty vector");
  }
  if (!v.allFinite()) {
    throw InvalidInputError("simplex_project: non-finite entry");
  }
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  // Largest k with sorted[k-1] - (sum_{<k} - 1)/k > 0 fixes the threshold.
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) theta = candidate;
  }

  Vector out = (v.array() - theta).max(0.0).matrix();
  // Remove the O(n eps) drift of the threshold so the sum is 1 to round-off.
  const double total = out.sum();
  if (total > 0.0) {
    out /= total;
  } else {
    // Only reachable through catastrophic cancellation; fall back to the argmax vertex.
    Eigen::Index best = 0;
    v.maxCoeff(&best);
    out.setZero();
    out(best) = 1.0;
  }
  return out;
}

int TargetSpec::dim() const {
  return std::visit(
      [](const auto& d) -> int {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, GaussianTarget>) {
          return static_cast<int>(d.mean.size());
        } else if constexpr (std::is_same_v<T, MixtureTarget>) {
          return d.components.empty() ? 0 : static_cast<int>(d.components.front().mean.size());
        } else {
          return d.dim;
        }
      },
      distribution);
}

namespace {

Matrix cholesky_factor(const Matrix& covariance, Eigen::Index dim) {
  if (covariance.rows() != dim || covariance.cols() != dim) {
    throw InvalidInputError("sample_target: covariance shape does not match mean");
  }
  if (!covariance.isApprox(covariance.transpose(), 1e-12)) {
    throw InvalidInputError("sample_target: covariance is not symmetric");
  }
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw InvalidInputError("sample_target: covariance is not positive definite");
  }
  return llt.matrixL();
}

struct PreparedComponent {
  Vector mean;
  Matrix factor;
};

MixtureTarget as_mixture(const TargetSpec& spec) {
  return std::visit(
      [](const auto& d) -> MixtureTarget {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, GaussianTarget>) {
          return MixtureTarget{{MixtureComponent{1.0, d.mean, d.covariance}}};
        } else if constexpr (std::is_same_v<T, MixtureTarget>) {
          return d;
        } else {
          return realize(d);
        }
      },
      spec.distribution);
}

}  // namespace

MixtureTarget realize(const RandomMixtureTarget& spec) {
  if (spec.dim < 1 || spec.components < 1 || !(spec.mean_norm >= 0.0) || !(spec.min_eigenvalue > 0.0)) {
    throw InvalidInputError("realize: invalid random mixture parameters");
  }
  std::mt19937_64 rng(spec.structure_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.dim));

  MixtureTarget out;
  for (int c = 0; c < spec.components; ++c) {
    Vector direction(spec.dim);
    do {
      for (int k = 0; k < spec.dim; ++k) direction(k) = normal(rng);
    } while (direction.norm() == 0.0);
    Vector mean = spec.mean_norm * direction.normalized();

    Matrix a(spec.dim, spec.dim);
    for (int j = 0; j < spec.dim; ++j) {
      for (int i = 0; i < spec.dim; ++i) a(i, j) = scale * normal(rng);
    }
    Matrix cov = a * a.transpose();
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += spec.min_eigenvalue;

    out.components.push_back(
        MixtureComponent{1.0 / static_cast<double>(spec.components), std::move(mean), std::move(cov)});
  }
  return out;
}

ParticleMeasure sample_target(const TargetSpec& spec, std::uint64_t seed) {
  if (spec.samples < 1) {
    throw InvalidInputError("sample_target: sample count must be >= 1");
  }
  const MixtureTarget mixture = as_mixture(spec);
  if (mixture.components.empty()) {
    throw InvalidInputError("sample_target: mixture has no components");
  }
  const Eigen::Index dim = mixture.components.front().mean.size();
  if (dim == 0) {
    throw InvalidInputError("sample_target: zero-dimensional mean");
  }

  std::vector<double> mix_weights;
  std::vector<PreparedComponent> prepared;
  double total = 0.0;
  for (const auto& c : mixture.components) {
    if (c.mean.size() != dim) {
      throw InvalidInputError("sample_target: mixture components differ in dimension");
    }
    if (!(c.weight >= 0.0) || !c.mean.allFinite()) {
      throw InvalidInputError("sample_target: invalid mixture component");
    }
    mix_weights.push_back(c.weight);
    total += c.weight;
    prepared.push_back(PreparedComponent{c.mean, cholesky_factor(c.covariance, dim)});
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidInputError("sample_target: mixture weights must sum to one");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::discrete_distribution<std::size_t> pick(mix_weights.begin(), mix_weights.end());

  Matrix locations(spec.samples, dim);
  Vector z(dim);
  for (int s = 0; s < spec.samples; ++s) {
    const std::size_t c = prepared.size() == 1 ? 0 : pick(rng);
    for (Eigen::Index k = 0; k < dim; ++k) z(k) = normal(rng);
    locations.row(s) = (prepared[c].mean + prepared[c].factor * z).transpose();
  }
  return uniform_measure(std::move(locations));
}

}  // namespace iftflow
