#include "iftflow/serialization.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace iftflow {

using nlohmann::json;

namespace {

json to_json_value(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json_value(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Matrix matrix_from(const json& j) {
  if (!j.is_array() || j.empty()) throw InvalidInputError("expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw InvalidInputError("ragged matrix rows");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

json measure_json(const ParticleMeasure& mu) {
  return json{{"locations", to_json_value(mu.locations())}, {"weights", to_json_value(mu.weights())}};
}

json target_json(const TargetSpec& spec) {
  json out = std::visit(
      [](const auto& d) -> json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, GaussianTarget>) {
          return json{{"kind", "gaussian"}, {"mean", to_json_value(d.mean)}, {"covariance", to_json_value(d.covariance)}};
        } else if constexpr (std::is_same_v<T, MixtureTarget>) {
          json comps = json::array();
          for (const auto& c : d.components) {
            comps.push_back(json{{"weight", c.weight},
                                 {"mean", to_json_value(c.mean)},
                                 {"covariance", to_json_value(c.covariance)}});
          }
          return json{{"kind", "mixture"}, {"components", std::move(comps)}};
        } else {
          return json{{"kind", "random_mixture"},
                      {"dim", d.dim},
                      {"components", d.components},
                      {"mean_norm", d.mean_norm},
                      {"min_eigenvalue", d.min_eigenvalue},
                      {"structure_seed", d.structure_seed}};
        }
      },
      spec.distribution);
  out["samples"] = spec.samples;
  return out;
}

TargetSpec target_from(const json& j) {
  TargetSpec spec;
  spec.samples = j.at("samples").get<int>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    spec.distribution = GaussianTarget{vector_from(j.at("mean")), matrix_from(j.at("covariance"))};
  } else if (kind == "mixture") {
    MixtureTarget mix;
    for (const auto& c : j.at("components")) {
      mix.components.push_back(
          MixtureComponent{c.at("weight").get<double>(), vector_from(c.at("mean")), matrix_from(c.at("covariance"))});
    }
    spec.distribution = std::move(mix);
  } else if (kind == "random_mixture") {
    spec.distribution = RandomMixtureTarget{j.at("dim").get<int>(), j.at("components").get<int>(),
                                            j.at("mean_norm").get<double>(), j.at("min_eigenvalue").get<double>(),
                                            j.at("structure_seed").get<std::uint64_t>()};
  } else {
    throw InvalidInputError("unknown target kind '" + kind + "'");
  }
  return spec;
}

std::string_view to_string(BandwidthConvention c) {
  return c == BandwidthConvention::kHalfInverseVariance ? "half_inverse_variance" : "inverse_variance";
}

BandwidthConvention convention_from(const std::string& s) {
  if (s == "half_inverse_variance") return BandwidthConvention::kHalfInverseVariance;
  if (s == "inverse_variance") return BandwidthConvention::kInverseVariance;
  throw InvalidInputError("unknown bandwidth convention '" + s + "'");
}

json flow_json(const FlowConfig& cfg) {
  return json{
      {"tau", cfg.tau},
      {"eta", cfg.eta},
      {"prox_tradeoff", cfg.prox_tradeoff},
      {"mmd_step_mode", cfg.mmd_step_mode == MmdStepMode::kExactQp ? "exact_qp" : "single_pgd"},
      {"prox_anchor", cfg.prox_anchor == ProxAnchor::kOldLocations ? "old_locations" : "new_locations"},
      {"transport_scaling", cfg.transport_scaling == TransportScaling::kMeasure ? "measure" : "particle"},
      {"pgd_step", cfg.pgd_step ? json(*cfg.pgd_step) : json(nullptr)},
      {"noise_level", cfg.noise_level},
      {"noise_off_iteration", cfg.noise_off_iteration},
      {"iterations", cfg.iterations},
      {"loss_every", cfg.loss_every},
      {"snapshot_every", cfg.snapshot_every},
      {"seed", cfg.seed},
      {"qp_tol", cfg.qp_tol},
      {"qp_max_iter", cfg.qp_max_iter},
      {"gram_jitter", cfg.gram_jitter},
  };
}

FlowConfig flow_from(const json& j) {
  FlowConfig cfg;
  // Missing keys keep their defaults so hand-written configs can stay short.
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("tau", cfg.tau);
  get("eta", cfg.eta);
  get("prox_tradeoff", cfg.prox_tradeoff);
  if (j.contains("mmd_step_mode")) {
    const auto mode = j.at("mmd_step_mode").get<std::string>();
    if (mode == "exact_qp") cfg.mmd_step_mode = MmdStepMode::kExactQp;
    else if (mode == "single_pgd") cfg.mmd_step_mode = MmdStepMode::kSinglePgd;
    else throw InvalidInputError("unknown mmd_step_mode '" + mode + "'");
  }
  if (j.contains("prox_anchor")) {
    const auto anchor = j.at("prox_anchor").get<std::string>();
    if (anchor == "old_locations") cfg.prox_anchor = ProxAnchor::kOldLocations;
    else if (anchor == "new_locations") cfg.prox_anchor = ProxAnchor::kNewLocations;
    else throw InvalidInputError("unknown prox_anchor '" + anchor + "'");
  }
  if (j.contains("transport_scaling")) {
    const auto scaling = j.at("transport_scaling").get<std::string>();
    if (scaling == "measure") cfg.transport_scaling = TransportScaling::kMeasure;
    else if (scaling == "particle") cfg.transport_scaling = TransportScaling::kParticle;
    else throw InvalidInputError("unknown transport_scaling '" + scaling + "'");
  }
  if (j.contains("pgd_step") && !j.at("pgd_step").is_null()) cfg.pgd_step = j.at("pgd_step").get<double>();
  get("noise_level", cfg.noise_level);
  get("noise_off_iteration", cfg.noise_off_iteration);
  get("iterations", cfg.iterations);
  get("loss_every", cfg.loss_every);
  get("snapshot_every", cfg.snapshot_every);
  get("seed", cfg.seed);
  get("qp_tol", cfg.qp_tol);
  get("qp_max_iter", cfg.qp_max_iter);
  get("gram_jitter", cfg.gram_jitter);
  return cfg;
}

// %.17g keeps doubles round-trippable and the output byte-stable.
std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

std::string measure_to_json(const ParticleMeasure& mu) { return measure_json(mu).dump(); }

ParticleMeasure measure_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    return ParticleMeasure(matrix_from(j.at("locations")), vector_from(j.at("weights")));
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("measure_from_json: ") + e.what());
  }
}

std::string snapshot_to_json_line(const Snapshot& snapshot) {
  json j{{"step", snapshot.step}};
  j.update(measure_json(snapshot.measure));
  json vanished = json::array();
  for (Eigen::Index i = 0; i < snapshot.measure.size(); ++i) {
    if (snapshot.measure.vanished(i)) vanished.push_back(i);
  }
  j["vanished"] = std::move(vanished);
  return j.dump();
}

std::string experiment_to_json(const ExperimentSpec& spec) {
  json methods = json::array();
  for (Method m : spec.methods) methods.push_back(std::string(to_string(m)));
  const json j{
      {"name", spec.name},
      {"initial", target_json(spec.initial)},
      {"target", target_json(spec.target)},
      {"kernel", json{{"bandwidth", spec.kernel.bandwidth()},
                      {"convention", std::string(to_string(spec.kernel.convention()))}}},
      {"flow", flow_json(spec.flow)},
      {"method", std::string(to_string(spec.method))},
      {"methods", std::move(methods)},
      {"repeats", spec.repeats},
  };
  return j.dump(2);
}

ExperimentSpec experiment_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ExperimentSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.initial = target_from(j.at("initial"));
    spec.target = target_from(j.at("target"));
    const auto& k = j.at("kernel");
    spec.kernel = GaussianKernel(k.at("bandwidth").get<double>(),
                                 convention_from(k.value("convention", std::string("half_inverse_variance"))));
    spec.flow = flow_from(j.value("flow", json::object()));
    spec.method = parse_method(j.value("method", std::string("ift")));
    if (j.contains("methods")) {
      for (const auto& m : j.at("methods")) spec.methods.push_back(parse_method(m.get<std::string>()));
    }
    spec.repeats = j.value("repeats", 1);
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("experiment_from_json: ") + e.what());
  }
}

ExperimentSpec load_experiment(std::string_view name_or_path) {
  if (auto builtin = find_builtin(name_or_path)) return *builtin;
  const std::filesystem::path path{std::string(name_or_path)};
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidInputError("'" + path.string() + "' is neither a builtin experiment nor a readable file");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return experiment_from_json(buffer.str());
}

std::string losses_csv(const RunSummary& summary) {
  std::string out = "step,mean_loss,std_loss\n";
  for (std::size_t i = 0; i < summary.steps.size(); ++i) {
    out += std::to_string(summary.steps[i]);
    out += ',';
    out += format_double(summary.mean_loss[i]);
    out += ',';
    out += format_double(summary.std_loss[i]);
    out += '\n';
  }
  return out;
}

void write_outputs(const RunSummary& summary, const Trace& trace, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + out_dir.string() + "': " + ec.message());

  std::string lines;
  for (const auto& snap : trace.snapshots) {
    // Round-trip through the validating constructor before anything reaches disk.
    const ParticleMeasure checked(snap.measure.locations(), snap.measure.weights(), snap.measure.is_probability());
    lines += snapshot_to_json_line(Snapshot{snap.step, checked});
    lines += '\n';
  }

  json failures = json::array();
  for (const auto& [repeat, what] : summary.failures) failures.push_back(json{{"repeat", repeat}, {"error", what}});
  const json report{
      {"experiment", summary.spec.name},
      {"method", std::string(to_string(summary.spec.method))},
      {"succeeded", summary.succeeded},
      {"final_losses", summary.final_losses},
      {"failures", std::move(failures)},
      {"wall_seconds", summary.wall_seconds},
      {"total_wall_seconds", summary.total_wall_seconds},
  };

  write_file(out_dir / "losses.csv", losses_csv(summary));
  write_file(out_dir / "trajectory.jsonl", lines);
  write_file(out_dir / "config.json", experiment_to_json(summary.spec) + "\n");
  write_file(out_dir / "summary.json", report.dump(2) + "\n");
}

}  // namespace iftflow
