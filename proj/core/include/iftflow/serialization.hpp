#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "iftflow/experiment.hpp"

namespace iftflow {

/// {"locations": [[...], ...], "weights": [...]}
std::string measure_to_json(const ParticleMeasure& mu);
ParticleMeasure measure_from_json(std::string_view text);

/// One trajectory.jsonl line: {"step": i, "locations": ..., "weights": ..., "vanished": [indices]}.
std::string snapshot_to_json_line(const Snapshot& snapshot);

std::string experiment_to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_from_json(std::string_view text);

/// Builtin name, or a path to a JSON file written by experiment_to_json.
ExperimentSpec load_experiment(std::string_view name_or_path);

/// "step,mean_loss,std_loss" with one row per recorded step. Byte-stable for equal inputs.
std::string losses_csv(const RunSummary& summary);

/// Writes losses.csv, trajectory.jsonl (from `trace`), config.json and summary.json
/// (final losses, failures, timings) into out_dir, creating it if needed.
/// Snapshots are re-validated before writing. Throws std::runtime_error with the path on I/O failure.
void write_outputs(const RunSummary& summary, const Trace& trace, const std::filesystem::path& out_dir);

}  // namespace iftflow
