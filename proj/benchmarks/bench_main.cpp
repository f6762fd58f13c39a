#include <random>

#include <benchmark/benchmark.h>

#include "iftflow/experiment.hpp"
#include "iftflow/flows.hpp"

using namespace iftflow;

namespace {

Matrix cloud(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) out(i, k) = normal(rng);
  }
  return out;
}

void BM_Gram(benchmark::State& state) {
  const Matrix x = cloud(state.range(0), state.range(1), 1);
  const GaussianKernel kernel(10.0);
  for (auto _ : state) benchmark::DoNotOptimize(kernel.gram(x));
}
BENCHMARK(BM_Gram)->Args({100, 2})->Args({100, 100})->Args({1000, 2});

void BM_WitnessGradientField(benchmark::State& state) {
  const auto n = state.range(0);
  const MmdEnergy energy(GaussianKernel(10.0), uniform_measure(cloud(n, 2, 2)));
  const ParticleMeasure mu = uniform_measure(cloud(n, 2, 3));
  for (auto _ : state) benchmark::DoNotOptimize(energy.witness_gradient_field(mu, mu.locations()));
}
BENCHMARK(BM_WitnessGradientField)->Arg(100)->Arg(1000);

void BM_SolveQpExact(benchmark::State& state) {
  const auto n = state.range(0);
  const GaussianKernel kernel(1.0);
  const ParticleMeasure prev = uniform_measure(cloud(n, 2, 4));
  const Matrix moved = prev.locations() + 0.1 * cloud(n, 2, 5);
  const SimplexQp qp = assemble_mmd_step_qp(make_gram_bundle(kernel, moved, cloud(n, 2, 6), prev.locations()),
                                            prev.weights(), 0.1, n);
  for (auto _ : state) benchmark::DoNotOptimize(solve_qp_exact(qp, prev.weights()));
}
BENCHMARK(BM_SolveQpExact)->Arg(10)->Arg(100);

void BM_IftIterations(benchmark::State& state) {
  const ExperimentSpec spec = *find_builtin("gaussian2d");
  const ProblemInstance inst = make_instance(spec, 0);
  FlowConfig cfg = flow_config_for(spec, Method::kIft, 0);
  cfg.iterations = 100;
  for (auto _ : state) benchmark::DoNotOptimize(run_ift(inst.energy, inst.initial, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.iterations);
}
BENCHMARK(BM_IftIterations)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
