#include <benchmark/benchmark.h>

#include "hamdrift/averaging.hpp"
#include "hamdrift/chart.hpp"
#include "hamdrift/sim.hpp"

using namespace hamdrift;

namespace {

PerturbedSystem pendulum_system() {
  return PerturbedSystem(Expr::parse("1 - cos(x) + y^2/2"), 4,
                         {},
                         {{1, Expr::parse("kap*y*sin(x)")},
                          {2, Expr::parse("lam*y")}},
                         1.8, {{"kap", 1.0}, {"lam", -1.0}});
}

void BM_ExprEval(benchmark::State& state) {
  Expr e = Expr::parse("y*(lam + kap*x - mu*(x^2+y^2)/2)");
  CompiledExpr c = e.compile({{"lam", 0.5}, {"kap", 0.1}, {"mu", 0.5}});
  double x = 0.3, y = -0.7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(c.eval(x, y));
    x += 1e-9;
  }
}
BENCHMARK(BM_ExprEval);

void BM_SampleOrbit(benchmark::State& state) {
  PerturbedSystem sys = pendulum_system();
  for (auto _ : state) {
    OrbitSamples orb = sample_orbit(sys, 0.9, 256);
    benchmark::DoNotOptimize(orb.omega);
  }
}
BENCHMARK(BM_SampleOrbit);

void BM_BuildChart(benchmark::State& state) {
  PerturbedSystem sys = pendulum_system();
  std::size_t n_e = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    ActionAngleChart chart = build_chart(sys, n_e, 256);
    benchmark::DoNotOptimize(chart.energy_defect());
  }
}
BENCHMARK(BM_BuildChart)->Arg(8)->Arg(16)->Arg(48);

void BM_AveragedModel(benchmark::State& state) {
  PerturbedSystem sys = pendulum_system();
  ActionAngleChart chart = build_chart(sys, 48, 256);
  for (auto _ : state) {
    AveragedModel model = build_averaged_model(sys, chart, 3);
    benchmark::DoNotOptimize(model.leading.size());
  }
}
BENCHMARK(BM_AveragedModel);

void BM_Integrate(benchmark::State& state) {
  PerturbedSystem sys = pendulum_system();
  IntegrateOptions opts;
  opts.record_peaks = false;
  double t_end = static_cast<double>(state.range(0));
  for (auto _ : state) {
    Trajectory traj = integrate(sys, 0.5, 0.0, 1.0, t_end, opts);
    benchmark::DoNotOptimize(traj.e_end());
  }
}
BENCHMARK(BM_Integrate)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
