#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mtopo {

enum class Criterion { None, VonMises, Findley, Matake, DangVan };

Criterion parse_criterion(const std::string& name);
std::string to_string(Criterion c);
bool is_fatigue(Criterion c);

/// Linear fatigue criterion tau_a + alpha * sigma <= beta, with the
/// coefficients calibrated to the fully reversed bending (f_-1) and torsion
/// (t_-1) limits.
struct FatigueParams {
  Criterion criterion = Criterion::Findley;
  double alpha = 0.0;
  double beta = 0.0;  // MPa
  double f_minus1 = 0.0;
  double t_minus1 = 0.0;
};

FatigueParams fatigue_params(Criterion criterion, double f_minus1, double t_minus1);

/// Stress vectors are Voigt [xx yy xy] in 2D (plane stress) and
/// [xx yy zz xy yz xz] in 3D.
double von_mises(std::span<const double> sigma);
/// Normalized von Mises constraint sigma_vm / sigma_bar - 1.
double von_mises_g(std::span<const double> sigma, double sigma_bar);

/// Local (n, a, b) triad of a material plane. In 2D only theta is used and
/// n = (cos theta, sin theta).
struct PlaneBasis {
  double theta = 0.0;
  double phi = 0.0;
  std::array<double, 3> n{};
  std::array<double, 3> a{};
  std::array<double, 3> b{};

  static PlaneBasis spatial(double theta, double phi);
  static PlaneBasis planar(double theta);
};

struct PlaneStress {
  double sigma_n = 0.0;
  double tau_na = 0.0;  // 3D only
  double tau_nb = 0.0;  // in 2D the single in-plane shear component
};

/// Projects the stress tensor onto the plane by direct tensor products.
PlaneStress transform_stress(std::span<const double> sigma, const PlaneBasis& plane, int dim);

struct PlaneExtremes {
  double tau_a = 0.0;
  double sigma_n_max = 0.0;
};

/// Extremes of an affine cycle on one plane, stress(t) = mean + amp sin(wt).
PlaneExtremes plane_cycle_extremes(const PlaneStress& mean, const PlaneStress& amp, int dim);

/// max_t tr(sigma(t)) / 3 for an affine cycle (sigma_zz = 0 in 2D).
double hydrostatic_max(std::span<const double> mean, std::span<const double> amp);

/// Discretized half-space of plane normals with precomputed linear
/// projection rows: sigma_n = cn . sigma, shear components = ca . sigma,
/// cb . sigma.
class PlaneGrid {
 public:
  static PlaneGrid make(int dim, double dtheta_deg, double dphi_deg = 5.0);

  int dim() const { return dim_; }
  int voigt() const { return dim_ == 2 ? 3 : 6; }
  int size() const { return static_cast<int>(planes_.size()); }
  const PlaneBasis& plane(int k) const { return planes_[k]; }
  std::span<const double> normal_row(int k) const { return {cn_.data() + k * voigt(), std::size_t(voigt())}; }
  std::span<const double> shear_row_a(int k) const { return {ca_.data() + k * voigt(), std::size_t(voigt())}; }
  std::span<const double> shear_row_b(int k) const { return {cb_.data() + k * voigt(), std::size_t(voigt())}; }
  double dtheta_deg() const { return dtheta_; }
  double dphi_deg() const { return dphi_; }

 private:
  int dim_ = 2;
  double dtheta_ = 1.0;
  double dphi_ = 5.0;
  std::vector<PlaneBasis> planes_;
  std::vector<double> cn_, ca_, cb_;
};

struct CriticalPlaneResult {
  int plane = -1;
  double theta = 0.0;
  double phi = 0.0;
  double tau_a = 0.0;
  double sigma_n_max = 0.0;
  double sigma_h_max = 0.0;
  double measure = 0.0;  // left-hand side of the criterion, MPa
  double g = 0.0;        // measure / beta - 1
};

CriticalPlaneResult critical_plane_g(std::span<const double> mean, std::span<const double> amp,
                                     const FatigueParams& params, const PlaneGrid& grid);

/// Identifies the smooth branch an evaluation went through: the critical
/// plane and the signs chosen at the cycle extremes. Two evaluations with the
/// same key are connected by one differentiable formula.
using BranchKey = std::uint64_t;

/// Constraint value and its gradient with respect to the mean and amplitude
/// stress vectors of one element under one load case.
struct ConstraintEval {
  double g = 0.0;
  std::array<double, 6> dg_dmean{};
  std::array<double, 6> dg_damp{};
  BranchKey branch = 0;
};

/// Element-level constraint function g for any supported criterion. Von
/// Mises under a cyclic load takes the larger of the two cycle extremes.
class StressCriterion {
 public:
  StressCriterion() = default;
  StressCriterion(Criterion criterion, int dim, double yield_mpa, double f_minus1, double t_minus1,
                  double dtheta_deg, double dphi_deg);

  Criterion criterion() const { return criterion_; }
  const FatigueParams& fatigue() const { return params_; }
  const PlaneGrid& grid() const { return grid_; }
  double yield() const { return yield_; }
  int dim() const { return dim_; }

  double g(std::span<const double> mean, std::span<const double> amp) const;
  ConstraintEval evaluate(std::span<const double> mean, std::span<const double> amp) const;

 private:
  ConstraintEval eval_von_mises(std::span<const double> mean, std::span<const double> amp) const;
  ConstraintEval eval_fatigue(std::span<const double> mean, std::span<const double> amp) const;

  Criterion criterion_ = Criterion::None;
  int dim_ = 2;
  double yield_ = 972.0;
  FatigueParams params_;
  PlaneGrid grid_;
};

}  // namespace mtopo
