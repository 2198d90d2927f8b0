#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mtopo/adjoint.hpp"

using namespace mtopo;

namespace {

Problem small_problem(int dim, int n, ObjectiveKind obj, Criterion crit, std::vector<LoadCase> loads,
                      double radius_cells = 1.5) {
  UnitCellModel model(build_mesh(dim, n, 10.0), Material{108800.0, 0.29});
  FilterOperator F = build_filter(model.mesh(), radius_cells * model.mesh().cell_size, 3.5, true);
  Problem p(std::move(model), std::move(F));
  p.objective.kind = obj;
  p.volume_fraction = 0.5;
  if (crit != Criterion::None) p.criterion = StressCriterion(crit, dim, 972, 454, 300, dim == 2 ? 1.0 : 10.0, 10.0);
  p.loads = std::move(loads);
  return p;
}

LoadCase biaxial() { return LoadCase::make_static("b", Eigen::Vector3d(-0.005, -0.005, 0.0)); }

}  // namespace

TEST_CASE("gradient parts add up") {
  Problem p = small_problem(2, 6, ObjectiveKind::PoissonMin, Criterion::VonMises, {biaxial()});
  const auto pt = make_grad_check_point(p, 3);
  CellSolver solver(p.solver, 2, p.model.num_equations());
  const Evaluation ev = evaluate(p, pt.rho, 2.0, pt.state, solver);
  const GradientBundle g = gradient(p, ev, pt.state, solver);
  for (int e = 0; e < 36; ++e) {
    const double sum = g.objective[e] + g.stress[e] + g.volume[e] + g.isotropy[e];
    CHECK(g.dJ_drho[e] == doctest::Approx(sum).epsilon(1e-12).scale(1e-15));
  }
  CHECK(ev.J == doctest::Approx(ev.c_normalized + ev.stress.P / 36 + ev.volume.P + ev.isotropy.P));
}

TEST_CASE("one adjoint solve per strain vector") {
  const Eigen::Vector3d m(-0.002, 0.001, 0.0), a(0.0, 0.0, 0.004);
  struct Case {
    std::vector<LoadCase> loads;
    int solves;
  };
  const std::vector<Case> cases = {
      {{biaxial()}, 1},
      {{LoadCase::make_sinusoid("z", Eigen::Vector3d::Zero(), a)}, 1},
      {{LoadCase::make_sinusoid("ma", m, a)}, 2},
      {{biaxial(), LoadCase::make_sinusoid("ma", m, a)}, 3},
  };
  for (const auto& c : cases) {
    Problem p = small_problem(2, 6, ObjectiveKind::BulkMax, Criterion::Findley, c.loads);
    const auto pt = make_grad_check_point(p, 1);
    CellSolver solver(p.solver, 2, p.model.num_equations());
    const Evaluation ev = evaluate(p, pt.rho, 2.0, pt.state, solver);
    const GradientBundle g = gradient(p, ev, pt.state, solver);
    CHECK(g.adjoint_solves == c.solves);
    CHECK(g.adjoints.cols() == c.solves);
  }
  Problem none = small_problem(2, 6, ObjectiveKind::BulkMax, Criterion::None, {biaxial()});
  const auto pt = make_grad_check_point(none, 1);
  CellSolver solver(none.solver, 2, none.model.num_equations());
  const Evaluation ev = evaluate(none, pt.rho, 2.0, pt.state, solver);
  CHECK(gradient(none, ev, pt.state, solver).adjoint_solves == 0);
}

TEST_CASE("clamped stress constraints contribute nothing") {
  Problem p = small_problem(2, 6, ObjectiveKind::BulkMax, Criterion::VonMises,
                            {LoadCase::make_static("s", Eigen::Vector3d(-1e-5, -1e-5, 0.0))});
  auto pt = make_grad_check_point(p, 2);
  for (double& l : pt.state.lambda_s) l = 0.0;  // g < 0 with lambda = 0 sits on the clamp
  CellSolver solver(p.solver, 2, p.model.num_equations());
  const Evaluation ev = evaluate(p, pt.rho, 2.0, pt.state, solver);
  for (char c : ev.stress.clamped) CHECK(c);
  const GradientBundle g = gradient(p, ev, pt.state, solver);
  for (double v : g.stress) CHECK(v == 0.0);

  FdOptions opt;
  opt.probes = 6;
  const FdReport r = finite_difference_check(p, pt.rho, pt.state, opt);
  CHECK(r.passed);
}

TEST_CASE("tensor gradient") {
  Problem p = small_problem(2, 6, ObjectiveKind::BulkMax, Criterion::None, {biaxial()});
  const ALState s = ALState::initial(0, 0.0, 10.0);
  CellSolver solver(p.solver, 2, p.model.num_equations());
  const Eigen::MatrixXd G = objective_partials(Eigen::MatrixXd::Identity(3, 3), ObjectiveKind::BulkMax);

  {
    const Evaluation ev = evaluate(p, std::vector<double>(36, 1.0), 0.0, s, solver);
    const auto t = tensor_gradient(p, ev, G);
    for (double v : t) CHECK(v == doctest::Approx(t[0]).epsilon(1e-10));
  }
  {
    std::vector<double> rho = testing::random_field(36, 4);
    rho[7] = 0.0;
    Problem id = small_problem(2, 6, ObjectiveKind::BulkMax, Criterion::None, {biaxial()}, 0.5);
    const Evaluation ev = evaluate(id, rho, 0.0, s, solver);
    const auto t = tensor_gradient(id, ev, G);
    CHECK(t[7] == 0.0);
    // central differences on the physical density
    const double h = 1e-6;
    for (int i : {0, 5, 17, 30}) {
      auto a = rho, b = rho;
      a[i] += h;
      b[i] -= h;
      const double fa = objective_value(evaluate(id, a, 0.0, s, solver).CH.C, ObjectiveKind::BulkMax);
      const double fb = objective_value(evaluate(id, b, 0.0, s, solver).CH.C, ObjectiveKind::BulkMax);
      CHECK(t[i] == doctest::Approx((fa - fb) / (2 * h)).epsilon(1e-5));
    }
  }
}

TEST_CASE("volume-only gradient is uniform on a uniform field") {
  Problem p = small_problem(2, 6, ObjectiveKind::BulkMax, Criterion::None, {biaxial()});
  ALState s = ALState::initial(0, 0.0, 10.0);
  s.lambda_v = 2.0;
  CellSolver solver(p.solver, 2, p.model.num_equations());
  const Evaluation ev = evaluate(p, std::vector<double>(36, 0.3), 3.0, s, solver);
  const GradientBundle g = gradient(p, ev, s, solver);
  const double slope = Projection{3.0, 0.5}.slope(0.3);
  const double expected = (s.lambda_v + s.mu * ev.volume.h) / (p.volume_fraction * 36) * slope;
  for (double v : g.volume) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("finite-difference harness, 2D") {
  SUBCASE("bulk, von Mises, static") {
    Problem p = small_problem(2, 6, ObjectiveKind::BulkMax, Criterion::VonMises, {biaxial()});
    const auto pt = make_grad_check_point(p, 3);
    FdOptions o;
    o.probes = 0;
    const FdReport r = finite_difference_check(p, pt.rho, pt.state, o);
    CHECK(r.passed);
    CHECK(r.max_rel_err < 1e-4);
  }
  SUBCASE("shear, Findley, zero-mean sinusoid") {
    Problem p = small_problem(2, 6, ObjectiveKind::ShearMax, Criterion::Findley,
                              {LoadCase::make_sinusoid("c", Eigen::Vector3d::Zero(), Eigen::Vector3d(0.002, 0, 0.006))});
    const auto pt = make_grad_check_point(p, 5);
    FdOptions o;
    o.probes = 0;
    o.threshold = 5e-4;
    const FdReport r = finite_difference_check(p, pt.rho, pt.state, o);
    CHECK(r.passed);
    CHECK(r.skipped < 36);
  }
  SUBCASE("Poisson, Matake, isotropy") {
    Problem p = small_problem(2, 6, ObjectiveKind::PoissonMin, Criterion::Matake,
                              {LoadCase::make_sinusoid("c", Eigen::Vector3d(0.001, 0, 0), Eigen::Vector3d(0.003, -0.001, 0.002))});
    const auto pt = make_grad_check_point(p, 6);
    FdOptions o;
    o.threshold = 5e-4;
    CHECK(finite_difference_check(p, pt.rho, pt.state, o).passed);
  }
  SUBCASE("corrupted gradient is caught") {
    Problem p = small_problem(2, 6, ObjectiveKind::BulkMax, Criterion::VonMises, {biaxial()});
    const auto pt = make_grad_check_point(p, 3);
    FdOptions o;
    o.probes = 0;
    o.corrupt = true;
    CHECK_FALSE(finite_difference_check(p, pt.rho, pt.state, o).passed);
  }
}

TEST_CASE("finite-difference harness, 3D shear with Dang Van") {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(6);
  a(3) = 0.008;
  Problem p = small_problem(3, 4, ObjectiveKind::ShearMax, Criterion::DangVan,
                            {LoadCase::make_sinusoid("c", Eigen::VectorXd::Zero(6), a)});
  const auto pt = make_grad_check_point(p, 4);
  FdOptions o;
  o.probes = 16;
  o.threshold = 5e-4;
  const FdReport r = finite_difference_check(p, pt.rho, pt.state, o);
  CHECK(r.passed);
  CHECK(r.max_rel_err < 5e-4);
}
