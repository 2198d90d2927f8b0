#include "mtopo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mtopo {

double max_abs_change(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> initial_design(const RucMesh& mesh, double vf) {
  if (!(vf > 0.0 && vf <= 1.0)) throw std::invalid_argument("volume fraction must lie in (0, 1]");
  const int N = mesh.num_elements;
  const double R = 0.25 * mesh.side_mm;
  const double h = mesh.cell_size;
  const double mid = 0.5 * mesh.side_mm;
  std::vector<double> rho(N);
  for (int e = 0; e < N; ++e) {
    const auto c = mesh.element_centroid(e);
    double r2 = 0.0;
    for (int d = 0; d < mesh.dim; ++d) r2 += (c[d] - mid) * (c[d] - mid);
    const double inside = 0.5 * (1.0 - std::tanh((std::sqrt(r2) - R) / h));
    rho[e] = vf * (1.0 - 0.5 * inside);
  }
  // Shift back to the target mean; clamping can eat part of a shift, so repeat.
  for (int it = 0; it < 50; ++it) {
    const double mean = std::accumulate(rho.begin(), rho.end(), 0.0) / N;
    const double shift = vf - mean;
    if (std::abs(shift) < 1e-14) break;
    for (auto& r : rho) r = std::clamp(r + shift, 0.0, 1.0);
  }
  return rho;
}

std::vector<double> rebalance_projected(const Problem& problem, std::span<const double> rho, double beta,
                                        double lo) {
  const double vf = problem.volume_fraction;
  std::vector<double> x(rho.size());
  const auto shifted = [&](double s) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(rho[i] + s, lo, 1.0);
    const auto f = DesignField::evaluate(problem.filter, x, beta, problem.eta, problem.exec);
    return std::accumulate(f.rho_bar.begin(), f.rho_bar.end(), 0.0) / static_cast<double>(x.size());
  };
  double a = -1.0, b = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double m = 0.5 * (a + b);
    (shifted(m) < vf ? a : b) = m;
  }
  shifted(0.5 * (a + b));
  return x;
}

namespace {

struct Candidate {
  bool valid = false;
  double beta = 0.0;
  double c = 0.0;
  int row = 0;
  std::vector<double> rho;
};

bool feasible(const Problem& p, const Evaluation& ev, double tol) {
  if (p.volume_equality ? std::abs(ev.volume.raw) > tol : ev.volume.raw > tol) return false;
  if (p.has_stress() && ev.max_g > tol) return false;
  return true;
}

}  // namespace

RunResult run_optimization(Problem problem, const OptimizerConfig& cfg, std::span<const double> rho0,
                           const ProgressFn& progress) {
  cfg.validate();
  const int N = problem.num_elements();
  const int dim = problem.model.mesh().dim;
  std::vector<double> rho =
      rho0.empty() ? rebalance_projected(problem, initial_design(problem.model.mesh(), problem.volume_fraction),
                                         cfg.beta0, cfg.rho_min)
                   : std::vector<double>(rho0.begin(), rho0.end());
  if (static_cast<int>(rho.size()) != N) throw std::invalid_argument("initial design has wrong length");

  CellSolver solver(problem.solver, dim, problem.model.num_equations());
  ALState state = ALState::initial(problem.num_stress(), cfg.lambda0, cfg.mu0);
  double beta = cfg.beta0;

  problem.objective.normalization = 1.0;
  Evaluation ev = evaluate(problem, rho, beta, state, solver);
  problem.objective.normalization = std::abs(ev.c) > 1e-12 ? std::abs(ev.c) : 1.0;
  ev = evaluate(problem, rho, beta, state, solver);

  // First-order multiplier estimate for the volume constraint: the lambda_v
  // that best cancels the objective gradient at the initial design.
  if (cfg.estimate_lambda_v) {
    ALState probe = state;
    probe.lambda_v = 1.0;
    probe.mu = 0.0;
    const Evaluation ev1 = evaluate(problem, rho, beta, probe, solver);
    const GradientBundle g1 = gradient(problem, ev1, probe, solver);
    double num = 0.0, den = 0.0;
    for (int e = 0; e < N; ++e) {
      num -= g1.objective[e] * g1.volume[e];
      den += g1.volume[e] * g1.volume[e];
    }
    if (den > 0.0) state.lambda_v = problem.volume_equality ? num / den : std::max(0.0, num / den);
    ev = evaluate(problem, rho, beta, state, solver);
  }

  MmaSettings ms;
  ms.move = cfg.move;
  ms.asy_min = cfg.asy_min;
  Mma mma(N, ms, cfg.rho_min, 1.0);

  RunResult res;
  res.normalization = problem.objective.normalization;
  Candidate best;
  int row = 0;
  for (int k = 0; k < cfg.max_iter; ++k) {
    double dmax = 0.0;
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      const GradientBundle grad = gradient(problem, ev, state, solver);
      std::vector<double> next = mma.step(rho, grad.dJ_drho);
      dmax = max_abs_change(next, rho);
      rho = std::move(next);
      ev = evaluate(problem, rho, beta, state, solver);
      HistoryRow h;
      h.iter = ++row;
      h.outer_k = k;
      h.objective = ev.c;
      h.normalized_objective = ev.c_normalized;
      h.max_g = ev.max_g;
      h.volume_fraction = ev.volume_fraction;
      h.mu = state.mu;
      h.beta = beta;
      h.dmax = dmax;
      h.al_value = ev.J;
      res.history.push_back(h);
      if (progress) progress(h);
      if (!std::isfinite(ev.J)) throw NumericalError("augmented Lagrangian became non-finite");
      if (dmax < cfg.delta) break;
    }
    res.outer_iterations = k + 1;

    const bool ok = feasible(problem, ev, cfg.delta_s);
    if (ok && (!best.valid || beta > best.beta || (beta == best.beta && ev.c < best.c))) {
      best = {true, beta, ev.c, row, rho};
    }
    if (dmax < cfg.delta && ok && beta >= cfg.beta_max) {
      res.converged = true;
      break;
    }
    if (k + 1 == cfg.max_iter) break;

    state = update_multipliers(state, ev.stress.h, ev.volume.h, ev.isotropy.h, cfg.alpha, cfg.mu_max);
    if ((k + 1) % cfg.beta_interval == 0) beta = std::min(beta + cfg.beta_step, cfg.beta_max);
    ev = evaluate(problem, rho, beta, state, solver);
  }

  res.state = state;
  res.beta = beta;
  res.returned_iteration = row;
  if (!res.converged && best.valid && best.row != row) {
    rho = best.rho;
    res.beta = best.beta;
    res.returned_iteration = best.row;
    ev = evaluate(problem, rho, best.beta, state, solver);
  }
  res.rho = std::move(rho);
  res.final = std::move(ev);
  return res;
}

}  // namespace mtopo
