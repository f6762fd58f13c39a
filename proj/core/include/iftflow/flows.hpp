#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "iftflow/energy.hpp"
#include "iftflow/solvers.hpp"

namespace iftflow {

enum class MmdStepMode { kExactQp, kSinglePgd };

/// Which measure the MMD-step prox is anchored at: the previous iterate
/// sum_i a_i delta_{x_i^l} (old locations), or the same weights moved to
/// the new locations x_i^{l+1}.
enum class ProxAnchor { kOldLocations, kNewLocations };

/// How the transport step scales the witness gradient at each particle.
/// kMeasure moves every particle by tau * grad w(x_i). kParticle moves it by
/// tau * 2 a_i grad w(x_i), the gradient of the discrete MMD^2 with respect to
/// x_i, so particles that carry no mass stay put.
enum class TransportScaling { kMeasure, kParticle };

/// Scalar hyperparameters shared by all flows.
///
/// The transport/reaction balance of the continuous flow is carried entirely
/// by `tau` (transport) and `prox_tradeoff` / `eta` (reaction).
struct FlowConfig {
  double tau = 50.0;           ///< transport step size
  double eta = 0.1;            ///< WFR mirror step; default PGD step of the MMD step
  double prox_tradeoff = 0.1;  ///< lambda: energy weight against the unit-weight MMD prox
  MmdStepMode mmd_step_mode = MmdStepMode::kSinglePgd;
  ProxAnchor prox_anchor = ProxAnchor::kOldLocations;
  TransportScaling transport_scaling = TransportScaling::kMeasure;
  std::optional<double> pgd_step;  ///< single_pgd step size; unset means eta

  double noise_level = 0.0;      ///< std of the gradient-evaluation noise
  long noise_off_iteration = 0;  ///< noise active while iteration < this

  long iterations = 1;
  long loss_every = 1;  ///< record loss when step % loss_every == 0 (and at the last step)
  long snapshot_every = 100;
  std::uint64_t seed = 0;

  double qp_tol = 1e-10;
  int qp_max_iter = 10000;
  double gram_jitter = 0.0;

  double effective_pgd_step() const { return pgd_step.value_or(eta); }
  void validate() const;
  bool operator==(const FlowConfig&) const = default;
};

struct LossRecord {
  long step;
  double loss;
};

struct Snapshot {
  long step;
  ParticleMeasure measure;
};

/// Output of one flow run. Losses are full MMD^2 values against the energy target.
struct Trace {
  std::vector<LossRecord> losses;
  std::vector<Snapshot> snapshots;
  int step_accounting = 1;     ///< steps charged per iteration (2 for split schemes)
  double time_per_step = 1.0;  ///< continuous time per recorded step index

  const ParticleMeasure& final_state() const;
  double final_loss() const;
  /// Loss recorded at exactly `step`, if any.
  std::optional<double> loss_at(long step) const;
};

/// A run stopped early. `partial()` holds everything recorded before the failure.
class FlowAborted : public std::runtime_error {
 public:
  enum class Reason { kDivergence, kConvergence, kDegenerate, kOther };

  FlowAborted(const std::string& what, Reason reason, long step, Trace partial)
      : std::runtime_error(what), reason_(reason), step_(step), partial_(std::move(partial)) {}

  Reason reason() const noexcept { return reason_; }
  long step() const noexcept { return step_; }
  const Trace& partial() const noexcept { return partial_; }

 private:
  Reason reason_;
  long step_;
  Trace partial_;
};

/// x_i <- x_i - tau * grad w_mu(x_i + xi_i), xi_i ~ N(0, noise_level^2 I). Weights unchanged.
/// With TransportScaling::kParticle the drift at x_i is multiplied by 2 a_i.
/// Throws DivergenceError on a non-finite result.
ParticleMeasure wasserstein_step(const MmdEnergy& energy, const ParticleMeasure& mu, double tau,
                                 double noise_level, std::mt19937_64& rng,
                                 TransportScaling scaling = TransportScaling::kMeasure);

/// Weight update on fixed locations. `moved` carries the new locations x^{l+1};
/// `previous` is the iterate x^l with weights alpha^l (same size). Returns `moved`
/// with the QP weights (exact or one projected-gradient step), vanished atoms clamped.
ParticleMeasure mmd_step(const MmdEnergy& energy, const ParticleMeasure& moved,
                         const ParticleMeasure& previous, const FlowConfig& cfg);

/// Entropic mirror step a_i <- a_i exp(-eta w_prev(x_i^{l+1})), renormalized, where
/// w_prev is the witness of `previous`. Throws DegenerateStateError if all mass underflows.
ParticleMeasure wfr_reweight(const MmdEnergy& energy, const ParticleMeasure& moved,
                             const ParticleMeasure& previous, double eta);

/// a_i exp(-eta g_i) / sum_j a_j exp(-eta g_j), evaluated with a shift for range safety.
/// Zero weights stay zero. Throws DegenerateStateError if no mass remains.
Vector multiplicative_update(const Vector& weights, const Vector& first_variation, double eta);

/// JKO splitting: transport step then MMD step, cfg.iterations times, no noise.
/// Losses are recorded after each half-step (step_accounting = 2).
Trace run_ift(const MmdEnergy& energy, const ParticleMeasure& mu0, const FlowConfig& cfg);

/// Transport-only baseline with the noise schedule of cfg; weights never change.
Trace run_mmd_flow(const MmdEnergy& energy, const ParticleMeasure& mu0, const FlowConfig& cfg);

/// Transport step then multiplicative weight update (step_accounting = 2).
Trace run_wfr(const MmdEnergy& energy, const ParticleMeasure& mu0, const FlowConfig& cfg);

/// Closed-form solution of the pure reaction flow mu' = -(mu - pi):
/// e^{-t} mu0 + (1 - e^{-t}) pi on the joint support (mu0 atoms first).
ParticleMeasure interpolation_oracle(const ParticleMeasure& mu0, const ParticleMeasure& target, double t);

/// Explicit Euler for mu' = -(mu - pi) on the joint support of mu0 and the
/// energy target: w <- w - h (w - w_pi). time_per_step = h. Requires 0 < h < 1.
Trace euler_spherical_mmd(const MmdEnergy& energy, const ParticleMeasure& mu0, double h, long steps);

/// Discrete spherical MMD velocity -G^{-1}(g - c 1), c = 1^T G^{-1} g / 1^T G^{-1} 1, for the
/// first variation g sampled at the atoms of a support with Gram matrix G (+ jitter I).
Vector spherical_reaction_velocity(const Matrix& gram, const Vector& first_variation, double jitter = 0.0);

/// Half-open range [begin, end) into Trace::losses.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Least-squares slope of log(loss) against time (step * time_per_step) over the window.
double fit_decay_rate(const Trace& trace, IndexRange window);

}  // namespace iftflow
