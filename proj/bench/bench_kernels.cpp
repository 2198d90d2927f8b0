// Serial reference vs OpenMP kernels on the 2D benchmark grid and a 3D cell.
// Run with --benchmark_filter=... ; thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "mtopo/adjoint.hpp"
#include "mtopo/config.hpp"
#include "mtopo/optimizer.hpp"

namespace {

mtopo::RunConfig bench_config(int dim, int res, mtopo::Criterion crit) {
  mtopo::RunConfig c;
  c.dim = dim;
  c.resolution = res;
  c.criterion = crit;
  c.dtheta_deg = dim == 2 ? 1.0 : 5.0;
  c.optimizer = mtopo::OptimizerConfig::for_dimension(dim);
  const int nv = dim == 2 ? 3 : 6;
  Eigen::VectorXd amp = Eigen::VectorXd::Zero(nv);
  amp[dim == 2 ? 2 : 3] = 0.008;
  c.loads.push_back(mtopo::LoadCase::make_sinusoid("shear", Eigen::VectorXd::Zero(nv), amp));
  return c;
}

struct Fixture {
  explicit Fixture(int dim, int res, mtopo::Criterion crit, mtopo::Exec exec)
      : cfg(bench_config(dim, res, crit)), problem(mtopo::make_problem(cfg, exec)) {
    rho = mtopo::initial_design(problem.model.mesh(), 0.5);
    state = mtopo::ALState::initial(problem.num_stress(), 0.0, 10.0);
  }
  mtopo::RunConfig cfg;
  mtopo::Problem problem;
  std::vector<double> rho;
  mtopo::ALState state;
};

mtopo::Exec exec_of(const benchmark::State& s) { return s.range(0) ? mtopo::Exec::Parallel : mtopo::Exec::Serial; }

void BM_Assemble2D(benchmark::State& s) {
  Fixture f(2, 60, mtopo::Criterion::VonMises, exec_of(s));
  for (auto _ : s) benchmark::DoNotOptimize(mtopo::assemble_stiffness(f.problem.model, f.rho, f.problem.simp, exec_of(s)));
}
BENCHMARK(BM_Assemble2D)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Assemble3D(benchmark::State& s) {
  Fixture f(3, 16, mtopo::Criterion::VonMises, exec_of(s));
  for (auto _ : s) benchmark::DoNotOptimize(mtopo::assemble_stiffness(f.problem.model, f.rho, f.problem.simp, exec_of(s)));
}
BENCHMARK(BM_Assemble3D)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Filter2D(benchmark::State& s) {
  Fixture f(2, 60, mtopo::Criterion::VonMises, exec_of(s));
  std::vector<double> g(f.rho.size(), 1.0);
  for (auto _ : s) {
    benchmark::DoNotOptimize(f.problem.filter.apply(f.rho, exec_of(s)));
    benchmark::DoNotOptimize(f.problem.filter.backprop(g, f.rho, exec_of(s)));
  }
}
BENCHMARK(BM_Filter2D)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Evaluate2DFindley(benchmark::State& s) {
  Fixture f(2, 60, mtopo::Criterion::Findley, exec_of(s));
  mtopo::CellSolver solver(mtopo::SolverKind::Direct, 2, f.problem.model.num_equations());
  for (auto _ : s) benchmark::DoNotOptimize(mtopo::evaluate(f.problem, f.rho, 2.0, f.state, solver));
}
BENCHMARK(BM_Evaluate2DFindley)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Gradient3DFindley(benchmark::State& s) {
  Fixture f(3, 12, mtopo::Criterion::Findley, exec_of(s));
  mtopo::CellSolver solver(mtopo::SolverKind::Direct, 3, f.problem.model.num_equations());
  const auto ev = mtopo::evaluate(f.problem, f.rho, 2.0, f.state, solver);
  for (auto _ : s) benchmark::DoNotOptimize(mtopo::gradient(f.problem, ev, f.state, solver));
}
BENCHMARK(BM_Gradient3DFindley)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
