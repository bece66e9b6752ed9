#include <benchmark/benchmark.h>

#include "osbm/metrics.hpp"
#include "osbm/selection.hpp"
#include "osbm/vbem.hpp"

using namespace osbm;

namespace {

struct Instance {
  AdjacencyMatrix x;
  VariationalState state;
  Hyperpriors priors;
  std::vector<Matrix> e_tildes;
};

Instance make_instance(Index n, Index q) {
  const OsbmParameters params =
      community_parameters(q, 6.0, 1.0, -5.5, Vector::Constant(q, 1.0 / static_cast<double>(q)));
  Instance inst;
  inst.x = sample_network(params, n, std::uint64_t{17}).first;
  inst.priors = Hyperpriors::defaults(q);
  const Matrix init = kmeans_init(inst.x, q, 29);
  // One M pass to get a representative mid-run state.
  inst.state.tau = init;
  inst.state.xi = Matrix::Constant(n, n, 1e-3);
  inst.e_tildes = e_tilde_all(init);
  std::tie(inst.state.eta_n, inst.state.zeta_n) = m_step_alpha(init, inst.priors);
  WStep ws = m_step_w(inst.x, init, inst.e_tildes, inst.state.xi, 1.0, 1.0);
  inst.state.w_n_vec = ws.w_n_vec;
  inst.state.sigma_n = ws.sigma_n;
  std::tie(inst.state.a_n, inst.state.b_n) =
      m_step_beta(ws.w_n_vec, ws.sigma_n, q, inst.priors);
  return inst;
}

}  // namespace

static void BM_MStepW(benchmark::State& state) {
  const Instance inst = make_instance(100, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(m_step_w(inst.x, inst.state.tau, inst.e_tildes, inst.state.xi,
                                      inst.state.a_n, inst.state.b_n));
  }
}
BENCHMARK(BM_MStepW)->Arg(2)->Arg(5)->Arg(8);

static void BM_EStepSweep(benchmark::State& state) {
  const Instance inst = make_instance(100, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(e_step_tau(inst.x, inst.state, inst.priors, 0.0, 1));
  }
}
BENCHMARK(BM_EStepSweep)->Arg(2)->Arg(5)->Arg(8);

static void BM_XiStep(benchmark::State& state) {
  const Instance inst = make_instance(100, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(xi_step(inst.state, inst.e_tildes));
  }
}
BENCHMARK(BM_XiStep)->Arg(2)->Arg(5)->Arg(8);

static void BM_LowerBound(benchmark::State& state) {
  const Instance inst = make_instance(100, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(lower_bound(inst.x, inst.state, inst.priors));
  }
}
BENCHMARK(BM_LowerBound)->Arg(2)->Arg(8);

static void BM_Fit(benchmark::State& state) {
  const Index q = state.range(0);
  const OsbmParameters params =
      community_parameters(q, 6.0, 1.0, -5.5, Vector::Constant(q, 1.0 / static_cast<double>(q)));
  const AdjacencyMatrix x = sample_network(params, 100, std::uint64_t{3}).first;
  const Hyperpriors priors = Hyperpriors::defaults(q);
  const Matrix init = kmeans_init(x, q, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit(x, q, init, priors));
  }
}
BENCHMARK(BM_Fit)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);

static void BM_SampleNetwork(benchmark::State& state) {
  const OsbmParameters params =
      community_parameters(5, 6.0, 1.0, -5.5, Vector::Constant(5, 0.2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_network(params, 100, std::uint64_t{11}));
  }
}
BENCHMARK(BM_SampleNetwork);

static void BM_ClusterDistance(benchmark::State& state) {
  const OsbmParameters params =
      community_parameters(5, 6.0, 1.0, -5.5, Vector::Constant(5, 0.2));
  auto [x, z] = sample_network(params, 200, std::uint64_t{13});
  for (auto _ : state) {
    benchmark::DoNotOptimize(cluster_distance(z, z));
  }
}
BENCHMARK(BM_ClusterDistance);

BENCHMARK_MAIN();
