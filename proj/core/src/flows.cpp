#include "iftflow/flows.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

namespace iftflow {

void FlowConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(tau)) throw InvalidInputError("FlowConfig: tau must be positive");
  if (!positive(eta)) throw InvalidInputError("FlowConfig: eta must be positive");
  if (!(prox_tradeoff >= 0.0) || !std::isfinite(prox_tradeoff)) {
    throw InvalidInputError("FlowConfig: prox_tradeoff must be nonnegative");
  }
  if (pgd_step && !positive(*pgd_step)) throw InvalidInputError("FlowConfig: pgd_step must be positive");
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level)) {
    throw InvalidInputError("FlowConfig: noise_level must be nonnegative");
  }
  if (iterations < 1) throw InvalidInputError("FlowConfig: iterations must be >= 1");
  if (loss_every < 1) throw InvalidInputError("FlowConfig: loss_every must be >= 1");
  if (snapshot_every < 0) throw InvalidInputError("FlowConfig: snapshot_every must be >= 0");
  if (!positive(qp_tol) || qp_max_iter < 1) throw InvalidInputError("FlowConfig: invalid QP solver settings");
  if (!(gram_jitter >= 0.0)) throw InvalidInputError("FlowConfig: gram_jitter must be nonnegative");
}

const ParticleMeasure& Trace::final_state() const {
  if (snapshots.empty()) throw InvalidInputError("Trace: no snapshots recorded");
  return snapshots.back().measure;
}

double Trace::final_loss() const {
  if (losses.empty()) throw InvalidInputError("Trace: no losses recorded");
  return losses.back().loss;
}

std::optional<double> Trace::loss_at(long step) const {
  for (const auto& rec : losses) {
    if (rec.step == step) return rec.loss;
  }
  return std::nullopt;
}

namespace {

class Recorder {
 public:
  Recorder(const FlowConfig& cfg, long total_steps, Trace& trace)
      : loss_every_(cfg.loss_every), snapshot_every_(cfg.snapshot_every), total_(total_steps), trace_(trace) {}

  bool wants_loss(long step) const { return step % loss_every_ == 0 || step == total_; }
  bool wants_snapshot(long step) const {
    return step == 0 || step == total_ || (snapshot_every_ > 0 && step % snapshot_every_ == 0);
  }

  void loss(long step, double value) { trace_.losses.push_back({step, value}); }
  void snapshot(long step, const ParticleMeasure& mu) { trace_.snapshots.push_back({step, mu}); }

 private:
  long loss_every_;
  long snapshot_every_;
  long total_;
  Trace& trace_;
};

void check_start(const MmdEnergy& energy, const ParticleMeasure& mu0, const FlowConfig& cfg) {
  cfg.validate();
  if (!mu0.is_probability()) throw InvalidInputError("flow: initial measure must be a probability measure");
  if (mu0.dim() != energy.target().dim()) throw InvalidInputError("flow: dimension mismatch with target");
}

Matrix draw_noise(Eigen::Index rows, Eigen::Index cols, double level, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix noise(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) noise(i, k) = level * normal(rng);
  }
  return noise;
}

void scale_drift(Matrix& drift, const Vector& weights, TransportScaling scaling) {
  if (scaling == TransportScaling::kParticle) drift = (2.0 * weights).asDiagonal() * drift;
}

Matrix transported(const Matrix& locations, const Matrix& drift, double tau, long step) {
  Matrix out = locations - tau * drift;
  if (!out.allFinite()) {
    throw DivergenceError("non-finite particle location after transport step " + std::to_string(step), step);
  }
  return out;
}

Vector reweight_by_qp(const GramBundle& bundle, const Vector& alpha, Eigen::Index m, const FlowConfig& cfg,
                      long step) {
  const SimplexQp qp = assemble_mmd_step_qp(bundle, alpha, cfg.prox_tradeoff, m, cfg.gram_jitter);
  Vector beta;
  if (cfg.mmd_step_mode == MmdStepMode::kExactQp) {
    beta = solve_qp_exact(qp, alpha, QpSolveOptions{cfg.qp_tol, cfg.qp_max_iter});
  } else {
    const Vector trial = alpha - cfg.effective_pgd_step() * qp.gradient(alpha);
    if (!trial.allFinite()) {
      throw DivergenceError("non-finite weights in MMD step " + std::to_string(step), step);
    }
    beta = simplex_project(trial);
  }
  return clamp_vanished(std::move(beta));
}

Vector reweight_by_mirror(const MmdEnergy& energy, const Matrix& kx_old, const Matrix& kxy, const Vector& alpha,
                          double eta) {
  const Vector first_variation = kx_old * alpha - kxy * energy.target().weights();
  return clamp_vanished(multiplicative_update(alpha, first_variation, eta));
}

FlowAborted::Reason classify(const std::exception& e) {
  if (dynamic_cast<const DivergenceError*>(&e)) return FlowAborted::Reason::kDivergence;
  if (dynamic_cast<const ConvergenceError*>(&e)) return FlowAborted::Reason::kConvergence;
  if (dynamic_cast<const DegenerateStateError*>(&e)) return FlowAborted::Reason::kDegenerate;
  return FlowAborted::Reason::kOther;
}

// Shared driver for the two split schemes; `react` maps (grams at new locations,
// previous measure, new locations) to new weights.
template <typename React>
Trace run_split_scheme(const MmdEnergy& energy, const ParticleMeasure& mu0, const FlowConfig& cfg, React react) {
  const GaussianKernel& kernel = energy.kernel();
  const Matrix& target_x = energy.target().locations();

  Trace trace;
  trace.step_accounting = 2;
  const long total = 2 * cfg.iterations;
  Recorder rec(cfg, total, trace);

  ParticleMeasure mu = mu0;
  Matrix kxx = kernel.gram(mu.locations());
  Matrix kxy = kernel.gram(mu.locations(), target_x);
  rec.loss(0, energy.mmd_squared_from_grams(kxx, kxy, mu.weights()));
  rec.snapshot(0, mu);

  long step = 0;
  try {
    for (long it = 0; it < cfg.iterations; ++it) {
      Matrix drift = energy.witness_gradient_from_grams(mu, mu.locations(), kxx, kxy);
      scale_drift(drift, mu.weights(), cfg.transport_scaling);
      ++step;
      ParticleMeasure moved = mu.with_locations(transported(mu.locations(), drift, cfg.tau, step));
      Matrix kxx_new = kernel.gram(moved.locations());
      Matrix kxy_new = kernel.gram(moved.locations(), target_x);
      if (rec.wants_loss(step)) rec.loss(step, energy.mmd_squared_from_grams(kxx_new, kxy_new, mu.weights()));
      if (rec.wants_snapshot(step)) rec.snapshot(step, moved);

      ++step;
      Vector weights = react(kxx_new, kxy_new, mu, moved.locations(), step);
      mu = moved.with_weights(std::move(weights));
      if (rec.wants_loss(step)) rec.loss(step, energy.mmd_squared_from_grams(kxx_new, kxy_new, mu.weights()));
      if (rec.wants_snapshot(step)) rec.snapshot(step, mu);

      kxx = std::move(kxx_new);
      kxy = std::move(kxy_new);
    }
  } catch (const FlowAborted&) {
    throw;
  } catch (const std::exception& e) {
    throw FlowAborted(e.what(), classify(e), step, std::move(trace));
  }
  return trace;
}

}  // namespace

ParticleMeasure wasserstein_step(const MmdEnergy& energy, const ParticleMeasure& mu, double tau,
                                 double noise_level, std::mt19937_64& rng, TransportScaling scaling) {
  if (!(tau >= 0.0) || !(noise_level >= 0.0)) {
    throw InvalidInputError("wasserstein_step: tau and noise_level must be nonnegative");
  }
  if (tau == 0.0) return mu;
  Matrix drift;
  if (noise_level > 0.0) {
    const Matrix queries = mu.locations() + draw_noise(mu.size(), mu.dim(), noise_level, rng);
    drift = energy.witness_gradient_field(mu, queries);
  } else {
    drift = energy.witness_gradient_field(mu, mu.locations());
  }
  scale_drift(drift, mu.weights(), scaling);
  return mu.with_locations(transported(mu.locations(), drift, tau, -1));
}

ParticleMeasure mmd_step(const MmdEnergy& energy, const ParticleMeasure& moved, const ParticleMeasure& previous,
                         const FlowConfig& cfg) {
  cfg.validate();
  if (moved.size() != previous.size() || moved.dim() != previous.dim()) {
    throw InvalidInputError("mmd_step: moved and previous measures differ in shape");
  }
  if (moved.dim() != energy.target().dim()) throw InvalidInputError("mmd_step: dimension mismatch with target");
  const GaussianKernel& kernel = energy.kernel();
  GramBundle bundle;
  bundle.kxx = kernel.gram(moved.locations());
  bundle.kxy = kernel.gram(moved.locations(), energy.target().locations());
  bundle.kx_old = cfg.prox_anchor == ProxAnchor::kOldLocations
                      ? kernel.gram(moved.locations(), previous.locations())
                      : bundle.kxx;
  return moved.with_weights(reweight_by_qp(bundle, previous.weights(), energy.target_size(), cfg, -1));
}

Vector multiplicative_update(const Vector& weights, const Vector& first_variation, double eta) {
  if (weights.size() != first_variation.size()) {
    throw InvalidInputError("multiplicative_update: dimension mismatch");
  }
  if (!first_variation.allFinite()) {
    throw DivergenceError("multiplicative_update: non-finite first variation", -1);
  }
  // Shift by the smallest exponent among live atoms so the largest factor is exactly 1.
  double shift = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) > 0.0) shift = std::min(shift, first_variation(i));
  }
  if (!std::isfinite(shift)) throw DegenerateStateError("multiplicative_update: no atom carries mass");
  Vector out(weights.size());
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    out(i) = weights(i) > 0.0 ? weights(i) * std::exp(-eta * (first_variation(i) - shift)) : 0.0;
  }
  const double total = out.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateStateError("multiplicative_update: all weights underflowed");
  }
  return out / total;
}

ParticleMeasure wfr_reweight(const MmdEnergy& energy, const ParticleMeasure& moved, const ParticleMeasure& previous,
                             double eta) {
  if (moved.size() != previous.size() || moved.dim() != previous.dim()) {
    throw InvalidInputError("wfr_reweight: moved and previous measures differ in shape");
  }
  const GaussianKernel& kernel = energy.kernel();
  const Matrix kx_old = kernel.gram(moved.locations(), previous.locations());
  const Matrix kxy = kernel.gram(moved.locations(), energy.target().locations());
  return moved.with_weights(reweight_by_mirror(energy, kx_old, kxy, previous.weights(), eta));
}

Trace run_ift(const MmdEnergy& energy, const ParticleMeasure& mu0, const FlowConfig& cfg) {
  check_start(energy, mu0, cfg);
  const Eigen::Index m = energy.target_size();
  return run_split_scheme(energy, mu0, cfg,
                          [&](const Matrix& kxx_new, const Matrix& kxy_new, const ParticleMeasure& previous,
                              const Matrix& new_locations, long step) {
                            GramBundle bundle;
                            bundle.kxx = kxx_new;
                            bundle.kxy = kxy_new;
                            bundle.kx_old = cfg.prox_anchor == ProxAnchor::kOldLocations
                                                ? energy.kernel().gram(new_locations, previous.locations())
                                                : kxx_new;
                            return reweight_by_qp(bundle, previous.weights(), m, cfg, step);
                          });
}

Trace run_wfr(const MmdEnergy& energy, const ParticleMeasure& mu0, const FlowConfig& cfg) {
  check_start(energy, mu0, cfg);
  return run_split_scheme(energy, mu0, cfg,
                          [&](const Matrix&, const Matrix& kxy_new, const ParticleMeasure& previous,
                              const Matrix& new_locations, long) {
                            const Matrix kx_old = energy.kernel().gram(new_locations, previous.locations());
                            return reweight_by_mirror(energy, kx_old, kxy_new, previous.weights(), cfg.eta);
                          });
}

Trace run_mmd_flow(const MmdEnergy& energy, const ParticleMeasure& mu0, const FlowConfig& cfg) {
  check_start(energy, mu0, cfg);
  const double uniform = 1.0 / static_cast<double>(mu0.size());
  if (((mu0.weights().array() - uniform).abs() > kSimplexTolerance).any()) {
    throw InvalidInputError("run_mmd_flow: initial weights must be uniform");
  }
  const GaussianKernel& kernel = energy.kernel();
  const Matrix& target_x = energy.target().locations();

  Trace trace;
  trace.step_accounting = 1;
  const long total = cfg.iterations;
  Recorder rec(cfg, total, trace);
  std::mt19937_64 rng(cfg.seed);

  auto noise_at = [&](long it) { return it < cfg.noise_off_iteration ? cfg.noise_level : 0.0; };

  ParticleMeasure mu = mu0;
  std::optional<Matrix> kxx = kernel.gram(mu.locations());
  std::optional<Matrix> kxy = kernel.gram(mu.locations(), target_x);
  rec.loss(0, energy.mmd_squared_from_grams(*kxx, *kxy, mu.weights()));
  rec.snapshot(0, mu);

  long step = 0;
  try {
    for (long it = 0; it < cfg.iterations; ++it) {
      const double noise = noise_at(it);
      Matrix drift;
      if (noise > 0.0) {
        const Matrix queries = mu.locations() + draw_noise(mu.size(), mu.dim(), noise, rng);
        drift = energy.witness_gradient_from_grams(mu, queries, kernel.gram(queries, mu.locations()),
                                                   kernel.gram(queries, target_x));
      } else {
        if (!kxx) {
          kxx = kernel.gram(mu.locations());
          kxy = kernel.gram(mu.locations(), target_x);
        }
        drift = energy.witness_gradient_from_grams(mu, mu.locations(), *kxx, *kxy);
      }
      scale_drift(drift, mu.weights(), cfg.transport_scaling);
      ++step;
      mu = mu.with_locations(transported(mu.locations(), drift, cfg.tau, step));
      kxx.reset();
      kxy.reset();

      const bool reuse_next = step < total && noise_at(it + 1) == 0.0;
      if (rec.wants_loss(step) || reuse_next) {
        kxx = kernel.gram(mu.locations());
        kxy = kernel.gram(mu.locations(), target_x);
      }
      if (rec.wants_loss(step)) rec.loss(step, energy.mmd_squared_from_grams(*kxx, *kxy, mu.weights()));
      if (rec.wants_snapshot(step)) rec.snapshot(step, mu);
    }
  } catch (const std::exception& e) {
    throw FlowAborted(e.what(), classify(e), step, std::move(trace));
  }
  return trace;
}

ParticleMeasure interpolation_oracle(const ParticleMeasure& mu0, const ParticleMeasure& target, double t) {
  if (!(t >= 0.0)) throw InvalidInputError("interpolation_oracle: t must be nonnegative");
  if (mu0.dim() != target.dim()) throw InvalidInputError("interpolation_oracle: dimension mismatch");
  if (!mu0.is_probability() || !target.is_probability()) {
    throw InvalidInputError("interpolation_oracle: both measures must be probability measures");
  }
  const Eigen::Index n = mu0.size();
  const Eigen::Index m = target.size();
  Matrix joint(n + m, mu0.dim());
  joint << mu0.locations(), target.locations();
  const double keep = std::exp(-t);
  const double moved = -std::expm1(-t);
  Vector weights(n + m);
  weights << keep * mu0.weights(), moved * target.weights();
  return ParticleMeasure(std::move(joint), std::move(weights));
}

Trace euler_spherical_mmd(const MmdEnergy& energy, const ParticleMeasure& mu0, double h, long steps) {
  if (!(h > 0.0 && h < 1.0)) throw InvalidInputError("euler_spherical_mmd: h must lie in (0, 1)");
  if (steps < 0) throw InvalidInputError("euler_spherical_mmd: steps must be >= 0");
  if (mu0.dim() != energy.target().dim()) throw InvalidInputError("euler_spherical_mmd: dimension mismatch");
  const ParticleMeasure& target = energy.target();
  const Eigen::Index n = mu0.size();
  const Eigen::Index m = target.size();

  Matrix joint(n + m, mu0.dim());
  joint << mu0.locations(), target.locations();
  Vector w(n + m);
  w << mu0.weights(), Vector::Zero(m);
  Vector w_target(n + m);
  w_target << Vector::Zero(n), target.weights();

  const Matrix kzz = energy.kernel().gram(joint);
  const Matrix kzy = energy.kernel().gram(joint, target.locations());

  Trace trace;
  trace.step_accounting = 1;
  trace.time_per_step = h;
  trace.losses.push_back({0, energy.mmd_squared_from_grams(kzz, kzy, w)});
  trace.snapshots.push_back({0, ParticleMeasure(joint, w)});
  for (long s = 1; s <= steps; ++s) {
    w -= h * (w - w_target);
    trace.losses.push_back({s, energy.mmd_squared_from_grams(kzz, kzy, w)});
  }
  if (steps > 0) trace.snapshots.push_back({steps, ParticleMeasure(joint, w)});
  return trace;
}

Vector spherical_reaction_velocity(const Matrix& gram, const Vector& first_variation, double jitter) {
  if (gram.rows() != gram.cols() || gram.rows() != first_variation.size()) {
    throw InvalidInputError("spherical_reaction_velocity: dimension mismatch");
  }
  Matrix regularized = gram;
  regularized.diagonal().array() += jitter;
  Eigen::LDLT<Matrix> ldlt(regularized);
  if (ldlt.info() != Eigen::Success) {
    throw InvalidInputError("spherical_reaction_velocity: Gram matrix factorization failed");
  }
  const Vector u = ldlt.solve(first_variation);
  const Vector v = ldlt.solve(Vector::Ones(first_variation.size()));
  const double c = u.sum() / v.sum();
  return -(u - c * v);
}

double fit_decay_rate(const Trace& trace, IndexRange window) {
  if (window.end > trace.losses.size() || window.begin >= window.end || window.end - window.begin < 2) {
    throw InvalidInputError("fit_decay_rate: window must hold at least two recorded losses");
  }
  const auto count = static_cast<double>(window.end - window.begin);
  double mean_t = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = window.begin; i < window.end; ++i) {
    const auto& rec = trace.losses[i];
    if (!(rec.loss > 0.0)) throw InvalidInputError("fit_decay_rate: nonpositive loss in window");
    mean_t += static_cast<double>(rec.step) * trace.time_per_step;
    mean_y += std::log(rec.loss);
  }
  mean_t /= count;
  mean_y /= count;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = window.begin; i < window.end; ++i) {
    const auto& rec = trace.losses[i];
    const double dt = static_cast<double>(rec.step) * trace.time_per_step - mean_t;
    sxy += dt * (std::log(rec.loss) - mean_y);
    sxx += dt * dt;
  }
  if (sxx == 0.0) throw InvalidInputError("fit_decay_rate: window spans zero time");
  return sxy / sxx;
}

}  // namespace iftflow
