#include "iftflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

namespace iftflow {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kIft: return "ift";
    case Method::kMmdFlow: return "mmd_flow";
    case Method::kMmdFlowNoisy: return "mmd_flow_noisy";
    case Method::kWfr: return "wfr";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kIft, Method::kMmdFlow, Method::kMmdFlowNoisy, Method::kWfr}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidInputError("unknown method '" + std::string(name) + "'");
}

int step_accounting(Method method) {
  return method == Method::kIft || method == Method::kWfr ? 2 : 1;
}

void ExperimentSpec::validate() const {
  if (repeats < 1) throw InvalidInputError("ExperimentSpec '" + name + "': repeats must be >= 1");
  if (initial.dim() != target.dim()) {
    throw InvalidInputError("ExperimentSpec '" + name + "': initial and target dimensions differ");
  }
  if (initial.dim() < 1) throw InvalidInputError("ExperimentSpec '" + name + "': zero dimension");
  flow.validate();
}

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

FlowConfig paper_2d_flow() {
  FlowConfig cfg;
  cfg.tau = 50.0;
  cfg.eta = 0.1;
  cfg.prox_tradeoff = 0.1;
  cfg.mmd_step_mode = MmdStepMode::kSinglePgd;
  cfg.prox_anchor = ProxAnchor::kOldLocations;
  cfg.transport_scaling = TransportScaling::kParticle;
  cfg.noise_level = 10.0;
  cfg.noise_off_iteration = 3000;
  cfg.iterations = 3000;
  cfg.loss_every = 1;
  cfg.snapshot_every = 100;
  cfg.seed = 0;
  return cfg;
}

GaussianTarget skewed_gaussian() {
  return GaussianTarget{vec2(0.0, 0.0), mat2(1.0, 0.5, 0.5, 2.0)};
}

}  // namespace

std::vector<ExperimentSpec> builtin_experiments() {
  std::vector<ExperimentSpec> out;

  ExperimentSpec gaussian;
  gaussian.name = "gaussian2d";
  gaussian.initial = TargetSpec{GaussianTarget{vec2(5.0, 5.0), Matrix::Identity(2, 2)}, 100};
  gaussian.target = TargetSpec{skewed_gaussian(), 100};
  gaussian.kernel = GaussianKernel(10.0);
  gaussian.flow = paper_2d_flow();
  gaussian.method = Method::kIft;
  gaussian.methods = {Method::kIft, Method::kMmdFlow, Method::kMmdFlowNoisy};
  gaussian.repeats = 50;
  out.push_back(gaussian);

  ExperimentSpec mixture = gaussian;
  mixture.name = "mixture2d";
  const double third = 1.0 / 3.0;
  mixture.target = TargetSpec{
      MixtureTarget{{
          MixtureComponent{third, vec2(0.0, 0.0), mat2(1.0, 0.5, 0.5, 2.0)},
          MixtureComponent{third, vec2(3.0, -1.0), Matrix::Identity(2, 2)},
          MixtureComponent{third, vec2(1.0, 4.0), mat2(3.0, 0.5, 0.5, 1.0)},
      }},
      100};
  out.push_back(mixture);

  ExperimentSpec high;
  high.name = "mixture100d";
  high.initial = TargetSpec{GaussianTarget{Vector::Zero(100), Matrix::Identity(100, 100)}, 100};
  high.target = TargetSpec{RandomMixtureTarget{100, 3, 20.0, 0.5, 2024}, 100};
  high.kernel = GaussianKernel(10.0);
  high.flow = paper_2d_flow();
  high.flow.iterations = 4500;
  high.flow.noise_off_iteration = 4000;
  high.flow.loss_every = 10;
  high.method = Method::kIft;
  high.methods = {Method::kIft, Method::kWfr, Method::kMmdFlowNoisy};
  high.repeats = 10;
  out.push_back(high);

  return out;
}

std::optional<ExperimentSpec> find_builtin(std::string_view name) {
  for (auto& spec : builtin_experiments()) {
    if (spec.name == name) return spec;
  }
  return std::nullopt;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

FlowConfig flow_config_for(const ExperimentSpec& spec, Method method, int repeat) {
  FlowConfig cfg = spec.flow;
  const std::uint64_t repeat_seed = spec.flow.seed + static_cast<std::uint64_t>(repeat);
  cfg.seed = derive_seed(repeat_seed, 3);
  cfg.iterations = spec.flow.iterations * 2 / step_accounting(method);
  if (method != Method::kMmdFlowNoisy) {
    cfg.noise_level = 0.0;
    cfg.noise_off_iteration = 0;
  }
  return cfg;
}

ProblemInstance make_instance(const ExperimentSpec& spec, int repeat) {
  const std::uint64_t repeat_seed = spec.flow.seed + static_cast<std::uint64_t>(repeat);
  ParticleMeasure initial = sample_target(spec.initial, derive_seed(repeat_seed, 1));
  ParticleMeasure target = sample_target(spec.target, derive_seed(repeat_seed, 2));
  return ProblemInstance{MmdEnergy(spec.kernel, std::move(target)), std::move(initial)};
}

Trace run_method(Method method, const MmdEnergy& energy, const ParticleMeasure& mu0, const FlowConfig& cfg) {
  switch (method) {
    case Method::kIft: return run_ift(energy, mu0, cfg);
    case Method::kWfr: return run_wfr(energy, mu0, cfg);
    case Method::kMmdFlow:
    case Method::kMmdFlowNoisy: return run_mmd_flow(energy, mu0, cfg);
  }
  throw InvalidInputError("run_method: unknown method");
}

namespace {

struct RepeatOutcome {
  std::optional<Trace> trace;
  std::string error;
  double seconds = 0.0;
};

RepeatOutcome run_repeat(const ExperimentSpec& spec, int repeat) {
  RepeatOutcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    const ProblemInstance instance = make_instance(spec, repeat);
    out.trace = run_method(spec.method, instance.energy, instance.initial, flow_config_for(spec, spec.method, repeat));
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

RunSummary run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  spec.validate();
  const int repeats = spec.repeats;
  std::vector<RepeatOutcome> outcomes(static_cast<std::size_t>(repeats));

  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(repeats));
  const auto start = std::chrono::steady_clock::now();
  if (threads <= 1) {
    for (int r = 0; r < repeats; ++r) outcomes[r] = run_repeat(spec, r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (int r = next++; r < repeats; r = next++) outcomes[r] = run_repeat(spec, r);
      });
    }
  }
  const double total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  RunSummary summary;
  summary.spec = spec;
  summary.total_wall_seconds = total_seconds;
  for (int r = 0; r < repeats; ++r) {
    auto& outcome = outcomes[r];
    summary.wall_seconds.push_back(outcome.seconds);
    if (!outcome.trace) {
      summary.failures.emplace_back(r, outcome.error);
      continue;
    }
    const Trace& trace = *outcome.trace;
    if (summary.succeeded.empty()) {
      for (const auto& rec : trace.losses) summary.steps.push_back(rec.step);
      summary.mean_loss.assign(summary.steps.size(), 0.0);
      summary.std_loss.assign(summary.steps.size(), 0.0);
    } else if (trace.losses.size() != summary.steps.size()) {
      summary.failures.emplace_back(r, "loss grid differs from the first repeat");
      continue;
    }
    summary.succeeded.push_back(r);
    summary.final_losses.push_back(trace.final_loss());
  }
  if (summary.succeeded.empty()) {
    std::string what = "run_experiment '" + spec.name + "': all repeats failed";
    if (!summary.failures.empty()) what += " (first: " + summary.failures.front().second + ")";
    throw std::runtime_error(what);
  }

  // Two-pass mean/variance in repeat order, so the result does not depend on thread scheduling.
  const auto count = static_cast<double>(summary.succeeded.size());
  for (int r : summary.succeeded) {
    const auto& losses = outcomes[r].trace->losses;
    for (std::size_t i = 0; i < losses.size(); ++i) summary.mean_loss[i] += losses[i].loss;
  }
  for (double& v : summary.mean_loss) v /= count;
  for (int r : summary.succeeded) {
    const auto& losses = outcomes[r].trace->losses;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      const double d = losses[i].loss - summary.mean_loss[i];
      summary.std_loss[i] += d * d;
    }
  }
  for (double& v : summary.std_loss) v = std::sqrt(v / count);

  summary.first_trace = std::move(outcomes[summary.succeeded.front()].trace);
  if (options.keep_traces) {
    summary.traces.push_back(*summary.first_trace);
    for (std::size_t k = 1; k < summary.succeeded.size(); ++k) {
      summary.traces.push_back(std::move(*outcomes[summary.succeeded[k]].trace));
    }
  }
  return summary;
}

}  // namespace iftflow
