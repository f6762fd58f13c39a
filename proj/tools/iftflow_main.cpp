// iftflow command line: run / compare experiments and check the closed-form oracles.
//
//   iftflow run --experiment gaussian2d --method ift --out out/ift
//   iftflow compare --experiment gaussian2d --methods ift,mmd_flow --out out/
//   iftflow oracle-check
//
// IFTFLOW_OUT_DIR, when set, overrides --out. Failures print one JSON line on
// stderr, {"error": <kind>, "message": <text>}, and exit nonzero.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "iftflow/experiment.hpp"
#include "iftflow/oracle_suite.hpp"
#include "iftflow/serialization.hpp"

namespace {

using namespace iftflow;

struct CommonArgs {
  std::string experiment;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  std::optional<long> iterations;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--experiment", args.experiment, "builtin name (gaussian2d, mixture2d, mixture100d) or JSON path")
      ->required();
  cmd->add_option("--out", args.out, "output directory (IFTFLOW_OUT_DIR overrides)");
  cmd->add_option("--seed", args.seed, "base seed; repeat r uses seed + r");
  cmd->add_option("--repeats", args.repeats, "number of independent repeats");
  cmd->add_option("--iterations", args.iterations, "iterations of the two-step schemes (baselines run twice as many)");
  cmd->add_option("--threads", args.threads, "worker threads for repeats (0: all cores)");
}

std::filesystem::path resolve_out(const CommonArgs& args) {
  if (const char* env = std::getenv("IFTFLOW_OUT_DIR"); env != nullptr && *env != '\0') return env;
  if (args.out.empty()) throw InvalidInputError("no output directory: pass --out or set IFTFLOW_OUT_DIR");
  return args.out;
}

ExperimentSpec prepare(const CommonArgs& args) {
  ExperimentSpec spec = load_experiment(args.experiment);
  if (args.seed) spec.flow.seed = *args.seed;
  if (args.repeats) spec.repeats = *args.repeats;
  if (args.iterations) spec.flow.iterations = *args.iterations;
  spec.validate();
  return spec;
}

std::vector<Method> parse_method_list(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_method(item));
  }
  if (out.empty()) throw InvalidInputError("empty method list");
  return out;
}

void run_one(ExperimentSpec spec, Method method, const std::filesystem::path& out_dir, unsigned threads) {
  spec.method = method;
  const RunSummary summary = run_experiment(spec, RunOptions{threads, false});
  write_outputs(summary, *summary.first_trace, out_dir);
  std::cout << spec.name << " " << to_string(method) << ": " << summary.succeeded.size() << "/" << spec.repeats
            << " repeats, final mean loss " << summary.mean_loss.back() << " +/- " << summary.std_loss.back()
            << ", " << summary.total_wall_seconds << " s -> " << out_dir.string() << "\n";
  for (const auto& [repeat, what] : summary.failures) {
    std::cerr << "warning: repeat " << repeat << " failed: " << what << "\n";
  }
}

int emit_error(std::string_view kind, std::string_view message, int code) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle gradient flows for MMD minimization (IFT, MMD flow, WFR)"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string method_name;
  auto* run = app.add_subcommand("run", "run one method on an experiment");
  add_common(run, run_args);
  run->add_option("--method", method_name, "ift | mmd_flow | mmd_flow_noisy | wfr")->required();

  CommonArgs compare_args;
  std::string method_list;
  auto* compare = app.add_subcommand("compare", "run several methods; writes <out>/<method>/losses.csv");
  add_common(compare, compare_args);
  compare->add_option("--methods", method_list, "comma-separated methods (default: the experiment's set)");

  std::uint64_t oracle_seed = 20240601;
  auto* oracle = app.add_subcommand("oracle-check", "run the closed-form oracle suite");
  oracle->add_option("--seed", oracle_seed, "seed for the random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return emit_error("usage", e.what(), 2);
  }

  try {
    if (*run) {
      run_one(prepare(run_args), parse_method(method_name), resolve_out(run_args), run_args.threads);
    } else if (*compare) {
      const ExperimentSpec spec = prepare(compare_args);
      const std::filesystem::path out = resolve_out(compare_args);
      const std::vector<Method> methods = method_list.empty() ? spec.methods : parse_method_list(method_list);
      if (methods.empty()) throw InvalidInputError("experiment defines no methods; pass --methods");
      for (Method m : methods) run_one(spec, m, out / std::string(to_string(m)), compare_args.threads);
    } else if (*oracle) {
      bool all = true;
      for (const auto& check : run_oracle_suite(oracle_seed)) {
        std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.detail << "\n";
        all = all && check.passed;
      }
      if (!all) return emit_error("oracle_failed", "one or more oracle checks failed", 1);
    }
  } catch (const InvalidInputError& e) {
    return emit_error("invalid_input", e.what(), 1);
  } catch (const FlowAborted& e) {
    return emit_error("flow_aborted", e.what(), 1);
  } catch (const std::exception& e) {
    return emit_error("runtime", e.what(), 1);
  }
  return 0;
}
