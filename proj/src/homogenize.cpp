#include "mtopo/homogenize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "mtopo/detail/loops.hpp"

namespace mtopo {

using detail::ElemMat;
using detail::ElemVec;
using detail::VoigtVec;

double Simp::weight(double rho_bar) const {
  return ersatz + (1.0 - ersatz) * std::pow(rho_bar, penalty);
}

double Simp::slope(double rho_bar) const {
  if (rho_bar <= 0.0) return penalty == 1.0 ? (1.0 - ersatz) : 0.0;
  return penalty * (1.0 - ersatz) * std::pow(rho_bar, penalty - 1.0);
}

namespace {

// Per-axis color: parity, with the last cell of an odd axis on its own.
int axis_color(int i, int n) { return (n % 2 == 1 && i == n - 1) ? 2 : i % 2; }

}  // namespace

UnitCellModel::UnitCellModel(RucMesh mesh, Material material)
    : mesh_(std::move(mesh)),
      dofs_(periodic_dof_map(mesh_)),
      elem_(element_stiffness_and_B(mesh_.dim, mesh_.cell_size, material.poisson)),
      material_(material) {
  if (!(material_.youngs_mpa > 0.0)) throw std::invalid_argument("Young's modulus must be positive");
  const int nd = mesh_.dofs_per_element();
  const int neq = dofs_.num_equations;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(mesh_.num_elements) * nd * nd);
  for (int e = 0; e < mesh_.num_elements; ++e) {
    const auto eq = dofs_.element_equations(e);
    for (int a = 0; a < nd; ++a)
      for (int b = 0; b < nd; ++b)
        if (eq[a] >= 0 && eq[b] >= 0) trips.emplace_back(eq[a], eq[b], 1.0);
  }
  pattern_.resize(neq, neq);
  pattern_.setFromTriplets(trips.begin(), trips.end());
  pattern_.makeCompressed();

  scatter_.assign(static_cast<std::size_t>(mesh_.num_elements) * nd * nd, -1);
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  for (int e = 0; e < mesh_.num_elements; ++e) {
    const auto eq = dofs_.element_equations(e);
    for (int a = 0; a < nd; ++a)
      for (int b = 0; b < nd; ++b) {
        if (eq[a] < 0 || eq[b] < 0) continue;
        const int* lo = inner + outer[eq[b]];
        const int* hi = inner + outer[eq[b] + 1];
        const int* it = std::lower_bound(lo, hi, eq[a]);
        scatter_[static_cast<std::size_t>(e) * nd * nd + a * nd + b] = static_cast<int>(it - inner);
      }
  }

  std::array<int, 3> ncol{1, 1, 1};
  for (int d = 0; d < mesh_.dim; ++d) ncol[d] = mesh_.res[d] % 2 == 1 ? 3 : 2;
  std::vector<std::vector<int>> by_color(ncol[0] * ncol[1] * ncol[2]);
  for (int e = 0; e < mesh_.num_elements; ++e) {
    const auto ijk = mesh_.element_ijk(e);
    int c = 0;
    for (int d = mesh_.dim - 1; d >= 0; --d) c = c * ncol[d] + axis_color(ijk[d], mesh_.res[d]);
    by_color[c].push_back(e);
  }
  for (auto& g : by_color)
    if (!g.empty()) colors_.push_back(std::move(g));
}

Eigen::VectorXd UnitCellModel::gather(const Eigen::MatrixXd& field, int col, int e) const {
  const auto eq = dofs_.element_equations(e);
  Eigen::VectorXd u(eq.size());
  for (std::size_t a = 0; a < eq.size(); ++a) u[a] = eq[a] >= 0 ? field(eq[a], col) : 0.0;
  return u;
}

void UnitCellModel::gather(const Eigen::VectorXd& field, int e, Eigen::VectorXd& out) const {
  const auto eq = dofs_.element_equations(e);
  out.resize(eq.size());
  for (std::size_t a = 0; a < eq.size(); ++a) out[a] = eq[a] >= 0 ? field[eq[a]] : 0.0;
}

AssembledStiffness assemble_stiffness(const UnitCellModel& model, std::span<const double> rho_bar,
                                      const Simp& simp, Exec exec) {
  const auto& mesh = model.mesh();
  if (static_cast<int>(rho_bar.size()) != mesh.num_elements)
    throw std::invalid_argument("density vector length does not match the element count");
  if (!(simp.penalty >= 1.0)) throw std::invalid_argument("SIMP penalty must be >= 1");
  if (!(simp.ersatz > 0.0 && simp.ersatz < 1.0))
    throw std::invalid_argument("ersatz stiffness must lie in (0, 1)");

  AssembledStiffness out;
  out.weights.resize(mesh.num_elements);
  for (int e = 0; e < mesh.num_elements; ++e) {
    const double r = rho_bar[e];
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("densities must lie in [0, 1]");
    out.weights[e] = simp.weight(r);
  }

  out.K = model.pattern();
  double* val = out.K.valuePtr();
  std::fill(val, val + out.K.nonZeros(), 0.0);
  const int nd = mesh.dofs_per_element();
  const auto& k0 = model.element().k0;
  const double E = model.material().youngs_mpa;
  detail::for_each_element_scatter(model, exec, [&](int e) {
    const auto pos = model.scatter_positions(e);
    const double w = E * out.weights[e];
    for (int a = 0; a < nd; ++a)
      for (int b = 0; b < nd; ++b) {
        const int p = pos[a * nd + b];
        if (p >= 0) val[p] += w * k0(a, b);
      }
  });
  return out;
}

Eigen::MatrixXd unit_strain_loads(const UnitCellModel& model, std::span<const double> weights,
                                  Exec exec) {
  const int nv = model.voigt_size();
  const int nd = model.mesh().dofs_per_element();
  const auto& load = model.element().load;
  const double E = model.material().youngs_mpa;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(model.num_equations(), nv);
  detail::for_each_element_scatter(model, exec, [&](int e) {
    const auto eq = model.dofs().element_equations(e);
    const double w = E * weights[e];
    for (int a = 0; a < nd; ++a) {
      if (eq[a] < 0) continue;
      for (int i = 0; i < nv; ++i) F(eq[a], i) += w * load(a, i);
    }
  });
  return F;
}

struct CellSolver::Impl {
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  bool analyzed = false;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  SparseMatrix K;  // own copy; the solvers keep references into it
};

SolverKind resolve_solver(SolverKind requested, int dim, int num_equations) {
  if (requested != SolverKind::Auto) return requested;
  // 3D factorizations fill in badly; only tiny 3D cells (gradient checks)
  // keep the exact solve.
  return (dim == 2 || num_equations <= 5000) ? SolverKind::Direct : SolverKind::ConjugateGradient;
}

CellSolver::CellSolver(SolverKind kind, int dim, int num_equations)
    : kind_(resolve_solver(kind, dim, num_equations)), impl_(std::make_unique<Impl>()) {
  if (kind_ == SolverKind::ConjugateGradient) {
    impl_->cg.setTolerance(0.5 * tolerance());
    impl_->cg.setMaxIterations(std::max(100, 10 * num_equations));
  }
}

CellSolver::~CellSolver() = default;
CellSolver::CellSolver(CellSolver&&) noexcept = default;
CellSolver& CellSolver::operator=(CellSolver&&) noexcept = default;

void CellSolver::factorize(const SparseMatrix& K) {
  impl_->K = K;
  factorized_ = true;
  const SparseMatrix& A = impl_->K;
  if (kind_ == SolverKind::Direct) {
    if (!impl_->analyzed) {
      impl_->ldlt.analyzePattern(A);
      impl_->analyzed = true;
    }
    impl_->ldlt.factorize(A);
    if (impl_->ldlt.info() != Eigen::Success)
      throw NumericalError("sparse LDL^T factorization failed (singular stiffness)");
    if ((impl_->ldlt.vectorD().array() <= 0.0).any())
      throw NumericalError("stiffness is not positive definite");
  } else {
    impl_->cg.compute(A);
    if (impl_->cg.info() != Eigen::Success) throw NumericalError("preconditioner setup failed");
  }
}

Eigen::MatrixXd CellSolver::solve(const Eigen::MatrixXd& rhs) const {
  if (!factorized_) throw NumericalError("solve called before factorize");
  Eigen::MatrixXd X(rhs.rows(), rhs.cols());
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
    const double bnorm = rhs.col(c).norm();
    if (bnorm == 0.0) {
      X.col(c).setZero();
      continue;
    }
    ++solves_;
    if (kind_ == SolverKind::Direct) {
      X.col(c) = impl_->ldlt.solve(rhs.col(c));
    } else {
      X.col(c) = impl_->cg.solve(rhs.col(c));
    }
    const double rel = (impl_->K * X.col(c) - rhs.col(c)).norm() / bnorm;
    if (!(rel <= tolerance())) {
      std::ostringstream msg;
      msg << "linear solve did not converge: relative residual " << rel << " > " << tolerance();
      if (kind_ == SolverKind::ConjugateGradient) msg << " after " << impl_->cg.iterations() << " CG iterations";
      throw NumericalError(msg.str());
    }
  }
  return X;
}

CellSolution solve_unit_cells(const UnitCellModel& model, const AssembledStiffness& K,
                              CellSolver& solver, Exec exec) {
  CellSolution sol;
  sol.weights = K.weights;
  solver.factorize(K.K);
  sol.U = solver.solve(unit_strain_loads(model, K.weights, exec));
  return sol;
}

RowMatrix element_energies(const UnitCellModel& model, const CellSolution& sol, Exec exec) {
  const int n = model.mesh().num_elements;
  const int nv = model.voigt_size();
  const int nd = model.mesh().dofs_per_element();
  const auto& em = model.element();
  RowMatrix Q(n, nv * nv);
  detail::for_each_element(n, exec, [&](int e) {
    const auto eq = model.dofs().element_equations(e);
    ElemMat X(nd, nv);
    for (int a = 0; a < nd; ++a)
      for (int i = 0; i < nv; ++i) X(a, i) = em.chi0(a, i) - (eq[a] >= 0 ? sol.U(eq[a], i) : 0.0);
    ElemMat KX = em.k0 * X;
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j) Q(e, i * nv + j) = X.col(i).dot(KX.col(j));
  });
  return Q;
}

HomogenizedTensor homogenized_matrix(const UnitCellModel& model, const CellSolution& sol, Exec exec) {
  return homogenized_matrix(model, sol, element_energies(model, sol, exec), exec);
}

HomogenizedTensor homogenized_matrix(const UnitCellModel& model, const CellSolution& sol,
                                     const RowMatrix& energies, Exec exec) {
  const int nv = model.voigt_size();
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::MatrixXd sum = detail::reduce_elements(
      model.mesh().num_elements, exec, zero, [&](int e, Eigen::MatrixXd& acc) {
        const double w = sol.weights[e];
        for (int i = 0; i < nv; ++i)
          for (int j = 0; j < nv; ++j) acc(i, j) += w * energies(e, i * nv + j);
      });
  HomogenizedTensor out;
  out.dim = model.mesh().dim;
  out.C = (model.material().youngs_mpa / model.mesh().cell_volume()) * sum;
  return out;
}

LoadCase LoadCase::make_static(std::string id, Eigen::VectorXd strain) {
  LoadCase lc;
  lc.id = std::move(id);
  lc.amplitude = Eigen::VectorXd::Zero(strain.size());
  lc.mean = std::move(strain);
  lc.cyclic = false;
  return lc;
}

LoadCase LoadCase::make_sinusoid(std::string id, Eigen::VectorXd mean, Eigen::VectorXd amplitude) {
  LoadCase lc;
  lc.id = std::move(id);
  lc.mean = std::move(mean);
  lc.amplitude = std::move(amplitude);
  lc.cyclic = true;
  return lc;
}

void LoadCase::validate(int voigt) const {
  if (mean.size() != voigt || amplitude.size() != voigt)
    throw std::invalid_argument("load case '" + id + "': strain vector length must be " +
                                std::to_string(voigt));
  if (!mean.allFinite() || !amplitude.allFinite())
    throw std::invalid_argument("load case '" + id + "': non-finite strain");
  if (mean.isZero(0.0) && amplitude.isZero(0.0))
    throw std::invalid_argument("load case '" + id + "': all strain components are zero");
  if (!cyclic && !amplitude.isZero(0.0))
    throw std::invalid_argument("load case '" + id + "': static load with nonzero amplitude");
}

Eigen::VectorXd fluctuation(const CellSolution& sol, const Eigen::VectorXd& strain) {
  return sol.U * strain;
}

RowMatrix element_stress(const UnitCellModel& model, const CellSolution& sol,
                         const Eigen::VectorXd& strain, Exec exec) {
  const int n = model.mesh().num_elements;
  const int nv = model.voigt_size();
  const int nd = model.mesh().dofs_per_element();
  RowMatrix S = RowMatrix::Zero(n, nv);
  if (strain.isZero(0.0)) return S;
  const Eigen::VectorXd u = fluctuation(sol, strain);
  const Eigen::MatrixXd CB = model.solid_C() * model.element().B;
  const VoigtVec Ceps = model.solid_C() * strain;
  detail::for_each_element(n, exec, [&](int e) {
    const auto eq = model.dofs().element_equations(e);
    ElemVec ue(nd);
    for (int a = 0; a < nd; ++a) ue[a] = eq[a] >= 0 ? u[eq[a]] : 0.0;
    VoigtVec s = Ceps - CB * ue;
    for (int i = 0; i < nv; ++i) S(e, i) = s[i];
  });
  return S;
}

StressCycle element_stress_cycle(const UnitCellModel& model, const CellSolution& sol,
                                 const LoadCase& load, Exec exec) {
  load.validate(model.voigt_size());
  StressCycle c;
  c.mean = element_stress(model, sol, load.mean, exec);
  c.amplitude = element_stress(model, sol, load.amplitude, exec);
  return c;
}

}  // namespace mtopo
