#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtopo/alopt.hpp"
#include "mtopo/criteria.hpp"
#include "mtopo/field.hpp"
#include "mtopo/homogenize.hpp"

namespace mtopo {

/// Everything that stays fixed while the design changes.
struct Problem {
  Problem(UnitCellModel m, FilterOperator f) : model(std::move(m)), filter(std::move(f)) {}

  UnitCellModel model;
  FilterOperator filter;
  Simp simp;
  double eta = 0.5;
  ObjectiveSpec objective;
  double volume_fraction = 0.5;
  bool volume_equality = true;
  StressCriterion criterion;  // Criterion::None disables the stress penalty
  double stress_limit = 972.0;  // MPa, for reporting von Mises g without a criterion
  std::vector<LoadCase> loads;
  Exec exec = Exec::Serial;
  SolverKind solver = SolverKind::Auto;

  int num_elements() const { return model.mesh().num_elements; }
  bool has_stress() const { return criterion.criterion() != Criterion::None; }
  int num_stress() const { return has_stress() ? num_elements() * static_cast<int>(loads.size()) : 0; }
};

/// Forward state of one design: field chain, cell solution, C^H, stresses,
/// constraint values and the augmented Lagrangian J.
struct Evaluation {
  DesignField field;
  std::vector<double> weights;
  CellSolution solution;
  RowMatrix energies;
  HomogenizedTensor CH;
  std::vector<StressCycle> cycles;              // one per load case
  std::vector<ConstraintEval> constraints;      // num_stress, load-case major
  std::vector<double> g;
  std::vector<double> von_mises;                // per element, max over loads and cycle extremes
  double c = 0.0;
  double c_normalized = 0.0;
  StressPenalty stress;
  ScalarPenalty volume;
  ScalarPenalty isotropy;
  double J = 0.0;
  double volume_fraction = 0.0;
  double max_g = 0.0;       // over solid-phase elements (rho_bar >= eta)
  double max_g_all = 0.0;   // over every element
  double max_von_mises = 0.0;  // over solid-phase elements

  /// One entry per non-smooth switch that J depends on: criterion branch
  /// and clamp flag per stress constraint, then the volume and isotropy
  /// clamps. Equal signatures mean one smooth formula covers both designs.
  std::vector<std::uint64_t> branch_signature() const;
};

/// Evaluates the design. Leaves `solver` factorized for this design so a
/// following `gradient` call can reuse it.
Evaluation evaluate(const Problem& problem, std::span<const double> rho, double beta,
                    const ALState& state, CellSolver& solver);

struct GradientBundle {
  std::vector<double> dJ_drho;
  std::vector<double> objective;
  std::vector<double> stress;
  std::vector<double> volume;
  std::vector<double> isotropy;
  /// Adjoint fields, one column per nonzero strain vector (mean and/or
  /// amplitude of each load case).
  Eigen::MatrixXd adjoints;
  int adjoint_solves = 0;
};

/// dC^H_ij / d rho_bar_e = E / |Omega| w'_e Q_e,ij; returns, per element,
/// sum_ij G_ij dC^H_ij / d rho_bar_e.
std::vector<double> tensor_gradient(const Problem& problem, const Evaluation& ev,
                                    const Eigen::MatrixXd& G);

/// Full AL gradient with respect to the raw design variables. `solver`
/// must hold the factorization of `ev`.
GradientBundle gradient(const Problem& problem, const Evaluation& ev, const ALState& state,
                        CellSolver& solver);

struct FdProbe {
  int index = 0;
  double analytic = 0.0;
  double fd = 0.0;
  double rel_err = 0.0;
  bool skipped = false;
};

struct FdReport {
  std::vector<FdProbe> probes;
  double max_rel_err = 0.0;
  double threshold = 0.0;
  int skipped = 0;
  bool passed = false;

  void write(const std::string& path) const;
};

struct FdOptions {
  int probes = 32;  // <= 0 or >= N probes every variable
  double step = 1e-6;
  double threshold = 1e-4;
  double beta = 2.0;
  std::uint64_t seed = 7;
  bool corrupt = false;  // negative-control hook: perturb one analytic entry
};

/// Central differences of J against the adjoint gradient at `rho`. Probes
/// whose +-h neighbors change the branch signature are skipped.
/// rel_err = |a - fd| / max(|a|, |fd|, 1e-3 * max|a|).
FdReport finite_difference_check(const Problem& problem, std::span<const double> rho,
                                 const ALState& state, const FdOptions& options);

/// Seeded design and multipliers used by the gradient check: rho in
/// [0.1, 0.9], lambda_s in [0, 1], lambda_v = lambda_iso = 0.5, mu = 10.
struct GradCheckPoint {
  std::vector<double> rho;
  ALState state;
};
GradCheckPoint make_grad_check_point(const Problem& problem, std::uint64_t seed);

}  // namespace mtopo
