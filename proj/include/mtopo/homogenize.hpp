#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mtopo/exec.hpp"
#include "mtopo/mesh.hpp"

namespace mtopo {

using SparseMatrix = Eigen::SparseMatrix<double>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Material {
  double youngs_mpa = 108800.0;
  double poisson = 0.29;
};

/// SIMP interpolation eps + (1 - eps) * rho^p.
struct Simp {
  double penalty = 5.0;
  double ersatz = 1e-9;

  double weight(double rho_bar) const;
  double slope(double rho_bar) const;  // d weight / d rho_bar
};

/// Discretization shared by every stage of an optimization: mesh, periodic
/// map, element operators, and the precomputed scatter positions of the
/// reduced stiffness pattern.
class UnitCellModel {
 public:
  UnitCellModel(RucMesh mesh, Material material);

  const RucMesh& mesh() const { return mesh_; }
  const DofMap& dofs() const { return dofs_; }
  const ElementMatrices& element() const { return elem_; }
  const Material& material() const { return material_; }
  int num_equations() const { return dofs_.num_equations; }
  int voigt_size() const { return mesh_.voigt_size(); }

  /// Solid constitutive matrix in MPa.
  Eigen::MatrixXd solid_C() const { return material_.youngs_mpa * elem_.C; }

  const SparseMatrix& pattern() const { return pattern_; }
  /// Position in pattern().valuePtr() of element-local entry (a, b), -1 if anchored.
  std::span<const int> scatter_positions(int e) const {
    const std::size_t nd2 = static_cast<std::size_t>(elem_.k0.size());
    return {scatter_.data() + e * nd2, nd2};
  }
  /// Elements grouped so that no two elements of a group share a node.
  const std::vector<std::vector<int>>& colors() const { return colors_; }

  /// Element-local gather of column `col` of a reduced field matrix.
  Eigen::VectorXd gather(const Eigen::MatrixXd& field, int col, int e) const;
  void gather(const Eigen::VectorXd& field, int e, Eigen::VectorXd& out) const;

 private:
  RucMesh mesh_;
  DofMap dofs_;
  ElementMatrices elem_;
  Material material_;
  SparseMatrix pattern_;
  std::vector<int> scatter_;
  std::vector<std::vector<int>> colors_;
};

/// Reduced stiffness K = sum_e E [eps + (1-eps) rho_bar_e^p] k0, anchored at
/// independent node 0. `weights` keeps the per-element SIMP factors.
struct AssembledStiffness {
  SparseMatrix K;
  std::vector<double> weights;
};

AssembledStiffness assemble_stiffness(const UnitCellModel& model, std::span<const double> rho_bar,
                                      const Simp& simp, Exec exec = Exec::Serial);

/// Right-hand sides f_i = sum_e E w_e integral(B^T C) eps0_i for the unit
/// test strains, one column per Voigt component.
Eigen::MatrixXd unit_strain_loads(const UnitCellModel& model, std::span<const double> weights,
                                  Exec exec = Exec::Serial);

enum class SolverKind { Auto, Direct, ConjugateGradient };

/// Factorization (or preconditioner) shared by the unit-strain solves and
/// all adjoint solves of one design.
class CellSolver {
 public:
  CellSolver(SolverKind kind, int dim, int num_equations);
  ~CellSolver();
  CellSolver(CellSolver&&) noexcept;
  CellSolver& operator=(CellSolver&&) noexcept;

  void factorize(const SparseMatrix& K);
  /// Solves K X = rhs. Throws NumericalError when the relative residual
  /// exceeds `tolerance()`.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  SolverKind kind() const { return kind_; }
  double tolerance() const { return 1e-9; }
  long solve_count() const { return solves_; }

 private:
  struct Impl;
  SolverKind kind_;
  std::unique_ptr<Impl> impl_;
  bool factorized_ = false;
  mutable long solves_ = 0;
};

SolverKind resolve_solver(SolverKind requested, int dim, int num_equations);

struct CellSolution {
  Eigen::MatrixXd U;  // num_equations x voigt, fluctuation field per unit strain
  std::vector<double> weights;
};

CellSolution solve_unit_cells(const UnitCellModel& model, const AssembledStiffness& K,
                              CellSolver& solver, Exec exec = Exec::Serial);

struct HomogenizedTensor {
  int dim = 2;
  Eigen::MatrixXd C;  // MPa
};

/// Per-element mutual energies Q_e = (chi0 - u_e)^T k0 (chi0 - u_e), stored
/// row-major as voigt*voigt entries per element. C^H = E/|Omega| sum w_e Q_e.
RowMatrix element_energies(const UnitCellModel& model, const CellSolution& sol,
                           Exec exec = Exec::Serial);

HomogenizedTensor homogenized_matrix(const UnitCellModel& model, const CellSolution& sol,
                                     Exec exec = Exec::Serial);
HomogenizedTensor homogenized_matrix(const UnitCellModel& model, const CellSolution& sol,
                                     const RowMatrix& energies, Exec exec = Exec::Serial);

/// Macroscopic strain history: sigma(t) follows mean + amplitude * sin(wt).
/// A static case has zero amplitude.
struct LoadCase {
  std::string id;
  Eigen::VectorXd mean;
  Eigen::VectorXd amplitude;
  bool cyclic = false;

  static LoadCase make_static(std::string id, Eigen::VectorXd strain);
  static LoadCase make_sinusoid(std::string id, Eigen::VectorXd mean, Eigen::VectorXd amplitude);
  void validate(int voigt) const;
};

/// Per-element centroid Cauchy stress (MPa) for the mean and amplitude
/// parts of a load case, computed with the solid constitutive matrix.
struct StressCycle {
  RowMatrix mean;       // elements x voigt
  RowMatrix amplitude;  // elements x voigt
};

/// Fluctuation displacement for an arbitrary macroscopic strain.
Eigen::VectorXd fluctuation(const CellSolution& sol, const Eigen::VectorXd& strain);

RowMatrix element_stress(const UnitCellModel& model, const CellSolution& sol,
                         const Eigen::VectorXd& strain, Exec exec = Exec::Serial);

StressCycle element_stress_cycle(const UnitCellModel& model, const CellSolution& sol,
                                 const LoadCase& load, Exec exec = Exec::Serial);

}  // namespace mtopo
