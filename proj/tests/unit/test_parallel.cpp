#include <doctest.h>

#include "helpers.hpp"
#include "mtopo/adjoint.hpp"
#include "mtopo/exec.hpp"

using namespace mtopo;

namespace {

double max_rel(std::span<const double> a, std::span<const double> b) {
  double m = 0.0, s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
    s = std::max(s, std::abs(b[i]));
  }
  return m / std::max(s, 1e-300);
}

struct ThreadGuard {
  explicit ThreadGuard(int n) : old(num_threads()) { set_num_threads(n); }
  ~ThreadGuard() { set_num_threads(old); }
  int old;
};

}  // namespace

TEST_CASE("serial and parallel kernels agree") {
  ThreadGuard guard(4);
  for (int dim : {2, 3}) {
    const int n = dim == 2 ? 12 : 5;
    UnitCellModel model(build_mesh(dim, n, 10.0), Material{108800.0, 0.29});
    const int N = model.mesh().num_elements;
    const auto rho = testing::random_field(N, 21);
    CAPTURE(dim);

    const auto Ks = assemble_stiffness(model, rho, Simp{}, Exec::Serial);
    const auto Kp = assemble_stiffness(model, rho, Simp{}, Exec::Parallel);
    CHECK(testing::rel_diff(Eigen::MatrixXd(Kp.K), Eigen::MatrixXd(Ks.K)) < 1e-13);

    FilterOperator F = build_filter(model.mesh(), 2.5 * model.mesh().cell_size, 3.5, true);
    const auto fs = F.apply(rho, Exec::Serial);
    const auto fp = F.apply(rho, Exec::Parallel);
    CHECK(max_rel(fp, fs) < 1e-14);
    const auto gs = F.backprop(rho, rho, Exec::Serial);
    const auto gp = F.backprop(rho, rho, Exec::Parallel);
    CHECK(max_rel(gp, gs) < 1e-13);

    Eigen::VectorXd a = Eigen::VectorXd::Zero(model.voigt_size());
    a(dim == 2 ? 2 : 3) = 0.004;
    Problem p(model, F);
    p.criterion = StressCriterion(Criterion::Findley, dim, 972, 454, 300, dim == 2 ? 1.0 : 10.0, 10.0);
    p.loads = {LoadCase::make_sinusoid("c", Eigen::VectorXd::Zero(model.voigt_size()), a)};
    const auto pt = make_grad_check_point(p, 8);

    Problem ps = p, pp = p;
    ps.exec = Exec::Serial;
    pp.exec = Exec::Parallel;
    CellSolver s1(p.solver, dim, model.num_equations()), s2(p.solver, dim, model.num_equations());
    const Evaluation es = evaluate(ps, pt.rho, 3.0, pt.state, s1);
    const Evaluation ep = evaluate(pp, pt.rho, 3.0, pt.state, s2);
    CHECK(testing::rel_diff(ep.CH.C, es.CH.C) < 1e-12);
    CHECK(max_rel(ep.g, es.g) < 1e-11);
    CHECK(ep.J == doctest::Approx(es.J).epsilon(1e-12));
    const auto grs = gradient(ps, es, pt.state, s1);
    const auto grp = gradient(pp, ep, pt.state, s2);
    CHECK(max_rel(grp.dJ_drho, grs.dJ_drho) < 1e-10);
  }
}

TEST_CASE("parallel results are reproducible") {
  ThreadGuard guard(3);
  UnitCellModel model(build_mesh(2, 16, 10.0), Material{108800.0, 0.29});
  const auto rho = testing::random_field(256, 2);
  const auto a = assemble_stiffness(model, rho, Simp{}, Exec::Parallel);
  const auto b = assemble_stiffness(model, rho, Simp{}, Exec::Parallel);
  CHECK(Eigen::MatrixXd(a.K) == Eigen::MatrixXd(b.K));
}
