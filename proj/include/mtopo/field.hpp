#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "mtopo/exec.hpp"
#include "mtopo/mesh.hpp"

namespace mtopo {

enum class FilterKind {
  DensityWeighted,  // F_IJ = L_IJ rho_J / sum_K L_IK rho_K
  Linear,           // F_IJ = L_IJ / sum_K L_IK
};

/// Polynomial-kernel filter, L_IJ = max(0, 1 - d_IJ / R)^s over element
/// centroids. The density-weighted kind normalizes at application time, so
/// it is nonlinear in rho and its Jacobian depends on the current design.
class FilterOperator {
 public:
  using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  FilterOperator() = default;
  FilterOperator(RowSparse kernel, double radius, double exponent, bool periodic, FilterKind kind);

  std::vector<double> apply(std::span<const double> rho, Exec exec = Exec::Serial) const;
  /// dJ/drho from dJ/drho_tilde, linearized at `rho`.
  std::vector<double> backprop(std::span<const double> grad_tilde, std::span<const double> rho,
                               Exec exec = Exec::Serial) const;
  /// Explicit F evaluated at `rho` (rows sum to one).
  RowSparse weights(std::span<const double> rho) const;

  const RowSparse& kernel() const { return L_; }
  double radius() const { return radius_; }
  double exponent() const { return exponent_; }
  bool periodic() const { return periodic_; }
  FilterKind kind() const { return kind_; }
  int size() const { return static_cast<int>(L_.rows()); }
  bool is_identity() const { return L_.nonZeros() == L_.rows(); }
  const std::string& warning() const { return warning_; }
  void set_warning(std::string w) { warning_ = std::move(w); }

  static constexpr double kDenominatorGuard = 1e-12;

 private:
  RowSparse L_;
  RowSparse Lt_;
  double radius_ = 0.0;
  double exponent_ = 1.0;
  bool periodic_ = true;
  FilterKind kind_ = FilterKind::DensityWeighted;
  std::string warning_;
};

FilterOperator build_filter(const RucMesh& mesh, double radius_mm, double exponent, bool periodic,
                            FilterKind kind = FilterKind::DensityWeighted);

/// Smoothed Heaviside threshold. beta == 0 is the identity map.
struct Projection {
  double beta = 1.0;
  double eta = 0.5;

  double value(double rho_tilde) const;
  double slope(double rho_tilde) const;
};

std::vector<double> project(std::span<const double> rho_tilde, double beta, double eta);

/// rho -> rho_tilde -> rho_bar for one design.
struct DesignField {
  std::vector<double> rho;
  std::vector<double> rho_tilde;
  std::vector<double> rho_bar;
  double beta = 1.0;
  double eta = 0.5;

  static DesignField evaluate(const FilterOperator& filter, std::span<const double> rho, double beta,
                              double eta, Exec exec = Exec::Serial);
};

/// dJ/drho = (d rho_tilde / d rho)^T diag(d rho_bar / d rho_tilde) dJ/drho_bar.
std::vector<double> backprop_chain(std::span<const double> dJ_drho_bar, const DesignField& field,
                                   const FilterOperator& filter, Exec exec = Exec::Serial);

}  // namespace mtopo
