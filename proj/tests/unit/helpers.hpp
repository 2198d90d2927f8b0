#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mtopo/adjoint.hpp"
#include "mtopo/homogenize.hpp"

namespace testing {

inline std::vector<double> random_field(int n, unsigned seed, double lo = 0.1, double hi = 0.9) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

inline mtopo::HomogenizedTensor homogenize(const mtopo::UnitCellModel& model, const std::vector<double>& rho_bar,
                                           mtopo::Exec exec = mtopo::Exec::Serial) {
  const auto K = mtopo::assemble_stiffness(model, rho_bar, mtopo::Simp{}, exec);
  mtopo::CellSolver solver(mtopo::SolverKind::Auto, model.mesh().dim, model.num_equations());
  solver.factorize(K.K);
  const auto sol = mtopo::solve_unit_cells(model, K, solver, exec);
  return mtopo::homogenized_matrix(model, sol, exec);
}

inline mtopo::UnitCellModel ti_model(int dim, int n) {
  return mtopo::UnitCellModel(mtopo::build_mesh(dim, n, 10.0), mtopo::Material{108800.0, 0.29});
}

}  // namespace testing
