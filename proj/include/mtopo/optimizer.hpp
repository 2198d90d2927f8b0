#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mtopo/adjoint.hpp"
#include "mtopo/alopt.hpp"
#include "mtopo/mma.hpp"

namespace mtopo {

/// One inner (MMA) iteration, evaluated at the design after the step.
struct HistoryRow {
  int iter = 0;
  int outer_k = 0;
  double objective = 0.0;
  double normalized_objective = 0.0;
  double max_g = 0.0;
  double volume_fraction = 0.0;
  double mu = 0.0;
  double beta = 0.0;
  double dmax = 0.0;
  double al_value = 0.0;  // J before the multiplier update, kept for diagnostics
};

struct RunResult {
  std::vector<double> rho;
  Evaluation final;  // evaluation of `rho`
  std::vector<HistoryRow> history;
  ALState state;
  double beta = 1.0;
  double normalization = 1.0;
  bool converged = false;
  int outer_iterations = 0;
  int returned_iteration = 0;  // history row of `rho`
};

/// Uniform V_f with a softened centered disk (ball in 3D) of radius
/// 0.25 side at 0.5 V_f, shifted back to mean V_f.
std::vector<double> initial_design(const RucMesh& mesh, double vf);

/// Shifts `rho` uniformly (clamped to [lo, 1]) so that the projected
/// field has mean `vf` at the given beta.
std::vector<double> rebalance_projected(const Problem& problem, std::span<const double> rho, double beta,
                                        double lo);

using ProgressFn = std::function<void(const HistoryRow&)>;

/// Nested AL loop. Inner: up to max_inner MMA steps with fixed multipliers,
/// stopping once max |d rho| < delta. Outer: multiplier/penalty update and
/// beta continuation. Converged when the last inner step moved less than
/// delta, beta has reached beta_max and every constraint holds within
/// delta_s. Without convergence the best feasible outer iterate at the
/// highest beta is returned, or the last one when none is feasible.
RunResult run_optimization(Problem problem, const OptimizerConfig& config,
                           std::span<const double> rho0 = {}, const ProgressFn& progress = {});

/// max |rho_bar| change etc. are computed on raw variables.
double max_abs_change(std::span<const double> a, std::span<const double> b);

}  // namespace mtopo
