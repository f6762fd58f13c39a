#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iftflow/flows.hpp"

namespace iftflow {

enum class Method { kIft, kMmdFlow, kMmdFlowNoisy, kWfr };

std::string_view to_string(Method method);
/// Accepts ift, mmd_flow, mmd_flow_noisy, wfr. Throws InvalidInputError otherwise.
Method parse_method(std::string_view name);

/// Steps charged per iteration when comparing methods on a common step axis.
int step_accounting(Method method);

/// One experiment of the run matrix.
///
/// `flow.iterations` counts iterations of the two-step schemes (ift, wfr); the
/// one-step baselines run `2 * flow.iterations` iterations so every method gets
/// the same step budget. `flow.seed` is the base seed: repeat r uses seed + r.
struct ExperimentSpec {
  std::string name;
  TargetSpec initial;
  TargetSpec target;
  GaussianKernel kernel{10.0};
  FlowConfig flow;
  Method method = Method::kIft;
  std::vector<Method> methods;  ///< default method set for `compare`
  int repeats = 1;

  void validate() const;
  bool operator==(const ExperimentSpec&) const = default;
};

/// gaussian2d, mixture2d, mixture100d.
std::vector<ExperimentSpec> builtin_experiments();
std::optional<ExperimentSpec> find_builtin(std::string_view name);

/// Seed for an independent stream (initial samples, target samples, noise) of one repeat.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Flow settings actually used for `method` on repeat `repeat`: iteration count
/// scaled to the step budget, noise forced off except for mmd_flow_noisy.
FlowConfig flow_config_for(const ExperimentSpec& spec, Method method, int repeat);

/// Problem instance of one repeat: energy against the sampled target and the sampled initial measure.
struct ProblemInstance {
  MmdEnergy energy;
  ParticleMeasure initial;
};
ProblemInstance make_instance(const ExperimentSpec& spec, int repeat);

/// Runs `method` once on an instance.
Trace run_method(Method method, const MmdEnergy& energy, const ParticleMeasure& mu0, const FlowConfig& cfg);

struct RunOptions {
  unsigned threads = 0;  ///< 0: hardware concurrency
  bool keep_traces = false;
};

struct RunSummary {
  ExperimentSpec spec;  ///< with `method` set to the method that ran
  std::vector<long> steps;
  std::vector<double> mean_loss;
  std::vector<double> std_loss;  ///< population standard deviation over successful repeats
  std::vector<int> succeeded;    ///< repeat indices, ascending
  std::vector<double> final_losses;  ///< aligned with `succeeded`
  std::vector<double> wall_seconds;  ///< per repeat (failed ones included), indexed by repeat
  double total_wall_seconds = 0.0;
  std::vector<std::pair<int, std::string>> failures;
  std::optional<Trace> first_trace;  ///< trace of the lowest successful repeat
  std::vector<Trace> traces;         ///< aligned with `succeeded` when keep_traces
};

/// Runs `spec.repeats` seeded repeats of `spec.method` and aggregates loss curves.
/// Failed repeats are recorded; throws only when every repeat fails.
RunSummary run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

}  // namespace iftflow
