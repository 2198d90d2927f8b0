#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtopo/criteria.hpp"
#include "mtopo/homogenize.hpp"

namespace mtopo {

enum class ObjectiveKind { BulkMax, ShearMax, PoissonMin };

ObjectiveKind parse_objective(const std::string& name);
std::string to_string(ObjectiveKind k);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::BulkMax;
  double normalization = 1.0;  // |c| of the initial design

  bool uses_isotropy() const { return kind == ObjectiveKind::PoissonMin; }
};

/// Optimizer defaults. mu0 is raised to 100 in 3D by `for_dimension`.
struct OptimizerConfig {
  double penalty = 5.0;
  double ersatz = 1e-9;
  double beta0 = 1.0;
  double beta_max = 10.0;
  double beta_step = 1.0;
  int beta_interval = 5;
  double eta = 0.5;
  double mu0 = 10.0;
  double lambda0 = 0.0;
  double mu_max = 10000.0;
  double alpha = 1.1;
  double filter_exponent = 3.5;
  double filter_radius_cells = 2.5;
  double delta = 0.005;
  double delta_s = 0.005;
  double move = 0.15;
  double asy_min = 1e-3;  // smallest MMA asymptote distance
  double rho_min = 1e-3;  // lower box bound on the raw variables
  bool estimate_lambda_v = true;  // start lambda_v from a least-squares KKT estimate
  int max_iter = 100;
  int max_inner = 15;

  static OptimizerConfig for_dimension(int dim);
  void validate() const;
};

/// Multipliers and penalty of the augmented Lagrangian. lambda_s holds one
/// entry per (load case, element), load-case major.
struct ALState {
  std::vector<double> lambda_s;
  double lambda_v = 0.0;
  double lambda_iso = 0.0;
  double mu = 10.0;
  int k = 0;

  static ALState initial(int num_stress, double lambda0, double mu0);
};

/// Objective c(C^H) and its partials dc/dC^H_ij.
double objective_value(const Eigen::MatrixXd& CH, ObjectiveKind kind);
Eigen::MatrixXd objective_partials(const Eigen::MatrixXd& CH, ObjectiveKind kind);

/// h_J = max(w(rho_bar) (g^3 + g), -lambda_J / mu) and
/// P = sum_J lambda_J h_J + mu/2 h_J^2 (before the 1/N_s factor).
struct StressPenalty {
  double P = 0.0;
  std::vector<double> h;
  std::vector<char> clamped;
};

StressPenalty stress_penalty(std::span<const double> rho_bar, std::span<const double> g,
                             const ALState& state, const Simp& simp);

struct ScalarPenalty {
  double P = 0.0;
  double h = 0.0;
  double raw = 0.0;  // constraint value before the clamp
  bool clamped = false;
};

/// Uniform cells: sum rho_bar V_e / (V_f |Omega|) - 1 = mean(rho_bar) / V_f - 1.
/// With `equality` the -lambda/mu floor is not applied.
ScalarPenalty volume_penalty(std::span<const double> rho_bar, double vf, const ALState& state,
                             bool equality = false);

/// Isotropic reference built from C^H. In 3D C11..C33 and C12..C23 are
/// averaged and the shear diagonal is (C11 - C12) / 2; in 2D the same
/// construction on the 3x3 plane-stress matrix.
Eigen::MatrixXd isotropic_reference(const Eigen::MatrixXd& CH);

/// sum over the nonzero entries of C^iso of (C^H_ij - C^iso_ij)^2 / (C^iso_ij + eps)^2,
/// with C^iso held fixed.
double isotropy_misfit(const Eigen::MatrixXd& CH, const Eigen::MatrixXd& Ciso, double eps = 1e-9);
/// Misfit with C^iso = isotropic_reference(CH), and its total derivative
/// with respect to C^H (C^iso depends on C^H).
double isotropy_misfit(const Eigen::MatrixXd& CH, Eigen::MatrixXd* dmisfit_dCH, double eps = 1e-9);

ScalarPenalty isotropy_penalty(const Eigen::MatrixXd& CH, const ALState& state, double eps = 1e-9);

/// lambda += mu h, mu = min(alpha mu, mu_max), k += 1.
ALState update_multipliers(const ALState& state, std::span<const double> h_s, double h_v,
                           double h_iso, double alpha, double mu_max);

}  // namespace mtopo
