#include "mtopo/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "mtopo/detail/loops.hpp"

namespace mtopo {

std::vector<std::uint64_t> Evaluation::branch_signature() const {
  std::vector<std::uint64_t> sig;
  sig.reserve(constraints.size() + 2);
  for (std::size_t J = 0; J < constraints.size(); ++J)
    sig.push_back((constraints[J].branch << 1) | static_cast<std::uint64_t>(stress.clamped[J] ? 1 : 0));
  sig.push_back(volume.clamped ? 1 : 0);
  sig.push_back(isotropy.clamped ? 1 : 0);
  return sig;
}

Evaluation evaluate(const Problem& problem, std::span<const double> rho, double beta,
                    const ALState& state, CellSolver& solver) {
  const auto& model = problem.model;
  const int N = problem.num_elements();
  const int nv = model.voigt_size();
  const Exec exec = problem.exec;
  if (static_cast<int>(rho.size()) != N) throw std::invalid_argument("design vector has wrong length");
  if (static_cast<int>(state.lambda_s.size()) != problem.num_stress())
    throw std::invalid_argument("multiplier vector does not match loads x elements");

  Evaluation ev;
  ev.field = DesignField::evaluate(problem.filter, rho, beta, problem.eta, exec);
  const auto K = assemble_stiffness(model, ev.field.rho_bar, problem.simp, exec);
  ev.weights = K.weights;
  ev.solution = solve_unit_cells(model, K, solver, exec);
  ev.energies = element_energies(model, ev.solution, exec);
  ev.CH = homogenized_matrix(model, ev.solution, ev.energies, exec);
  ev.c = objective_value(ev.CH.C, problem.objective.kind);
  ev.c_normalized = ev.c / problem.objective.normalization;

  ev.von_mises.assign(N, 0.0);
  for (const auto& load : problem.loads) {
    ev.cycles.push_back(element_stress_cycle(model, ev.solution, load, exec));
    const auto& cyc = ev.cycles.back();
    detail::for_each_element(N, exec, [&](int e) {
      std::array<double, 6> p{}, m{};
      for (int i = 0; i < nv; ++i) {
        p[i] = cyc.mean(e, i) + cyc.amplitude(e, i);
        m[i] = cyc.mean(e, i) - cyc.amplitude(e, i);
      }
      const double v = std::max(von_mises({p.data(), std::size_t(nv)}), von_mises({m.data(), std::size_t(nv)}));
      ev.von_mises[e] = std::max(ev.von_mises[e], v);
    });
  }

  const int Ns = problem.num_stress();
  ev.constraints.resize(Ns);
  ev.g.resize(Ns);
  for (std::size_t l = 0; l < ev.cycles.size() && Ns > 0; ++l) {
    const auto& cyc = ev.cycles[l];
    detail::for_each_element(N, exec, [&](int e) {
      const int J = static_cast<int>(l) * N + e;
      ev.constraints[J] = problem.criterion.evaluate({cyc.mean.row(e).data(), std::size_t(nv)},
                                                     {cyc.amplitude.row(e).data(), std::size_t(nv)});
      ev.g[J] = ev.constraints[J].g;
    });
  }

  const auto& rb = ev.field.rho_bar;
  ev.stress = stress_penalty(rb, ev.g, state, problem.simp);
  ev.volume = volume_penalty(rb, problem.volume_fraction, state, problem.volume_equality);
  if (problem.objective.uses_isotropy()) ev.isotropy = isotropy_penalty(ev.CH.C, state, problem.simp.ersatz);
  ev.J = ev.c_normalized + (Ns > 0 ? ev.stress.P / Ns : 0.0) + ev.volume.P + ev.isotropy.P;

  ev.volume_fraction = std::accumulate(rb.begin(), rb.end(), 0.0) / N;
  ev.max_g = -1.0;
  ev.max_g_all = -1.0;
  ev.max_von_mises = 0.0;
  for (int e = 0; e < N; ++e) {
    double ge = -1.0;
    if (Ns > 0) {
      for (std::size_t l = 0; l < problem.loads.size(); ++l) ge = std::max(ge, ev.g[l * N + e]);
    } else {
      ge = ev.von_mises[e] / problem.stress_limit - 1.0;
    }
    ev.max_g_all = std::max(ev.max_g_all, ge);
    if (rb[e] >= problem.eta) {
      ev.max_g = std::max(ev.max_g, ge);
      ev.max_von_mises = std::max(ev.max_von_mises, ev.von_mises[e]);
    }
  }
  return ev;
}

std::vector<double> tensor_gradient(const Problem& problem, const Evaluation& ev,
                                    const Eigen::MatrixXd& G) {
  const auto& model = problem.model;
  const int N = problem.num_elements();
  const int nv = model.voigt_size();
  const double scale = model.material().youngs_mpa / model.mesh().cell_volume();
  std::vector<double> out(N);
  detail::for_each_element(N, problem.exec, [&](int e) {
    double s = 0.0;
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j) s += G(i, j) * ev.energies(e, i * nv + j);
    out[e] = scale * problem.simp.slope(ev.field.rho_bar[e]) * s;
  });
  return out;
}

namespace {

// One forward field per nonzero strain vector of the load cases.
struct StrainField {
  int load = 0;
  bool amplitude = false;
  Eigen::VectorXd strain;
};

std::vector<StrainField> strain_fields(const Problem& problem) {
  std::vector<StrainField> out;
  for (std::size_t l = 0; l < problem.loads.size(); ++l) {
    const auto& L = problem.loads[l];
    if (!L.mean.isZero(0.0)) out.push_back({static_cast<int>(l), false, L.mean});
    if (!L.amplitude.isZero(0.0)) out.push_back({static_cast<int>(l), true, L.amplitude});
  }
  return out;
}

std::vector<double> stress_gradient(const Problem& problem, const Evaluation& ev, const ALState& state,
                                    CellSolver& solver, GradientBundle& bundle) {
  const auto& model = problem.model;
  const auto& em = model.element();
  const int N = problem.num_elements();
  const int nv = model.voigt_size();
  const int nd = model.mesh().dofs_per_element();
  const int Ns = problem.num_stress();
  const double E = model.material().youngs_mpa;
  const auto& rb = ev.field.rho_bar;
  std::vector<double> out(N, 0.0);
  if (Ns == 0) return out;
  const double inv_ns = 1.0 / Ns;

  // Coefficient (lambda + mu h) / N_s of every active constraint.
  std::vector<double> coef(Ns, 0.0);
  for (int J = 0; J < Ns; ++J)
    if (!ev.stress.clamped[J]) coef[J] = (state.lambda_s[J] + state.mu * ev.stress.h[J]) * inv_ns;

  // Explicit dependence through the interpolation weight.
  for (int J = 0; J < Ns; ++J) {
    const double g = ev.g[J];
    out[J % N] += coef[J] * problem.simp.slope(rb[J % N]) * (g * g * g + g);
  }

  const auto fields = strain_fields(problem);
  const int nf = static_cast<int>(fields.size());
  const int neq = model.num_equations();
  if (nf == 0) return out;

  // dP/du for every field: -E (C B)^T dg/dsigma scaled by the constraint
  // coefficient and w (3 g^2 + 1).
  const Eigen::MatrixXd CBt = (E * em.C * em.B).transpose();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(neq, nf);
  detail::for_each_element_scatter(model, problem.exec, [&](int e) {
    const auto eq = model.dofs().element_equations(e);
    for (int f = 0; f < nf; ++f) {
      const int J = fields[f].load * N + e;
      if (coef[J] == 0.0) continue;
      const auto& ce = ev.constraints[J];
      const double g = ce.g;
      const double s = coef[J] * ev.weights[e] * (3.0 * g * g + 1.0);
      const auto& dg = fields[f].amplitude ? ce.dg_damp : ce.dg_dmean;
      detail::VoigtVec d(nv);
      for (int i = 0; i < nv; ++i) d[i] = dg[i];
      const detail::ElemVec r = -s * (CBt * d);
      for (int a = 0; a < nd; ++a)
        if (eq[a] >= 0) rhs(eq[a], f) += r[a];
    }
  });

  const long before = solver.solve_count();
  bundle.adjoints = -solver.solve(rhs);
  bundle.adjoint_solves = static_cast<int>(solver.solve_count() - before);

  std::vector<Eigen::VectorXd> u(nf);
  for (int f = 0; f < nf; ++f) u[f] = fluctuation(ev.solution, fields[f].strain);

  // eta^T (dK/drho_bar u - df/drho_bar) = E w' eta_e^T k0 (u_e - chi0 eps).
  detail::for_each_element(N, problem.exec, [&](int e) {
    const auto eq = model.dofs().element_equations(e);
    const double ws = E * problem.simp.slope(rb[e]);
    double acc = 0.0;
    for (int f = 0; f < nf; ++f) {
      detail::ElemVec x(nd), eta(nd);
      const detail::ElemVec chi = em.chi0 * fields[f].strain;
      for (int a = 0; a < nd; ++a) {
        x[a] = (eq[a] >= 0 ? u[f][eq[a]] : 0.0) - chi[a];
        eta[a] = eq[a] >= 0 ? bundle.adjoints(eq[a], f) : 0.0;
      }
      acc += eta.dot(em.k0 * x);
    }
    out[e] += ws * acc;
  });
  return out;
}

}  // namespace

GradientBundle gradient(const Problem& problem, const Evaluation& ev, const ALState& state,
                        CellSolver& solver) {
  const int N = problem.num_elements();
  GradientBundle b;

  const std::vector<double> obj_bar =
      tensor_gradient(problem, ev, objective_partials(ev.CH.C, problem.objective.kind) / problem.objective.normalization);

  std::vector<double> iso_bar(N, 0.0);
  if (problem.objective.uses_isotropy() && !ev.isotropy.clamped) {
    Eigen::MatrixXd dm;
    isotropy_misfit(ev.CH.C, &dm, problem.simp.ersatz);
    iso_bar = tensor_gradient(problem, ev, (state.lambda_iso + state.mu * ev.isotropy.h) * dm);
  }

  std::vector<double> vol_bar(N, 0.0);
  if (!ev.volume.clamped) {
    const double v = (state.lambda_v + state.mu * ev.volume.h) / (problem.volume_fraction * N);
    std::fill(vol_bar.begin(), vol_bar.end(), v);
  }

  const std::vector<double> stress_bar = stress_gradient(problem, ev, state, solver, b);

  std::vector<double> total_bar(N);
  for (int e = 0; e < N; ++e) total_bar[e] = obj_bar[e] + stress_bar[e] + vol_bar[e] + iso_bar[e];

  const auto chain = [&](const std::vector<double>& v) {
    return backprop_chain(v, ev.field, problem.filter, problem.exec);
  };
  b.objective = chain(obj_bar);
  b.stress = chain(stress_bar);
  b.volume = chain(vol_bar);
  b.isotropy = chain(iso_bar);
  b.dJ_drho = chain(total_bar);
  return b;
}

void FdReport::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# index analytic fd rel_err status\n";
  out << std::setprecision(10);
  for (const auto& p : probes)
    out << p.index << ' ' << p.analytic << ' ' << p.fd << ' ' << p.rel_err << ' '
        << (p.skipped ? "skipped" : (p.rel_err <= threshold ? "ok" : "FAIL")) << '\n';
  out << "# max_rel_err " << max_rel_err << " threshold " << threshold << " skipped " << skipped
      << (passed ? " PASS" : " FAIL") << '\n';
}

FdReport finite_difference_check(const Problem& problem, std::span<const double> rho,
                                 const ALState& state, const FdOptions& opt) {
  const int N = problem.num_elements();
  const int neq = problem.model.num_equations();
  const int dim = problem.model.mesh().dim;
  CellSolver solver(problem.solver, dim, neq);
  const Evaluation base = evaluate(problem, rho, opt.beta, state, solver);
  GradientBundle grad = gradient(problem, base, state, solver);
  const auto base_sig = base.branch_signature();

  std::vector<int> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  if (opt.probes > 0 && opt.probes < N) {
    std::mt19937_64 rng(opt.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(opt.probes);
    std::sort(idx.begin(), idx.end());
  }

  const double amax = std::accumulate(grad.dJ_drho.begin(), grad.dJ_drho.end(), 0.0,
                                      [](double m, double v) { return std::max(m, std::abs(v)); });
  if (opt.corrupt) grad.dJ_drho[idx.front()] += 0.1 * amax + 1e-3;

  FdReport rep;
  rep.threshold = opt.threshold;
  CellSolver probe_solver(problem.solver, dim, neq);
  std::vector<double> x(rho.begin(), rho.end());
  for (int i : idx) {
    FdProbe p;
    p.index = i;
    p.analytic = grad.dJ_drho[i];
    const double x0 = x[i];
    x[i] = x0 + opt.step;
    const Evaluation plus = evaluate(problem, x, opt.beta, state, probe_solver);
    x[i] = x0 - opt.step;
    const Evaluation minus = evaluate(problem, x, opt.beta, state, probe_solver);
    x[i] = x0;
    p.fd = (plus.J - minus.J) / (2.0 * opt.step);
    p.skipped = plus.branch_signature() != base_sig || minus.branch_signature() != base_sig;
    const double den = std::max({std::abs(p.analytic), std::abs(p.fd), 1e-3 * amax,
                                 std::numeric_limits<double>::min()});
    p.rel_err = std::abs(p.analytic - p.fd) / den;
    if (p.skipped) {
      ++rep.skipped;
    } else {
      rep.max_rel_err = std::max(rep.max_rel_err, p.rel_err);
    }
    rep.probes.push_back(p);
  }
  const int checked = static_cast<int>(rep.probes.size()) - rep.skipped;
  rep.passed = checked > 0 && rep.max_rel_err <= opt.threshold;
  return rep;
}

GradCheckPoint make_grad_check_point(const Problem& problem, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dens(0.1, 0.9), mult(0.0, 1.0);
  GradCheckPoint pt;
  pt.rho.resize(problem.num_elements());
  for (auto& r : pt.rho) r = dens(rng);
  pt.state = ALState::initial(problem.num_stress(), 0.0, 10.0);
  for (auto& l : pt.state.lambda_s) l = mult(rng);
  pt.state.lambda_v = 0.5;
  pt.state.lambda_iso = 0.5;
  return pt;
}

}  // namespace mtopo
