// mtopo: stress- and fatigue-constrained topology optimization of periodic
// unit cells.
//
// Exit codes: 0 ok, 2 configuration error, 3 density file shape mismatch,
// 4 optimization not converged, 5 numerical failure, 6 gradient check failed.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtopo/adjoint.hpp"
#include "mtopo/config.hpp"
#include "mtopo/exec.hpp"
#include "mtopo/fileio.hpp"
#include "mtopo/optimizer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using mtopo::Exec;

namespace {

enum Exit { kOk = 0, kConfig = 2, kShape = 3, kNotConverged = 4, kNumerical = 5, kGradCheck = 6 };

struct Options {
  std::string config;
  std::string out;
  std::string density;
  int threads = 1;
  int probes = -1;
  bool corrupt = false;
  bool quiet = false;
};

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

Exec setup_threads(int threads) {
  if (threads < 1) throw mtopo::ConfigError("--threads", "must be >= 1");
  mtopo::set_num_threads(threads);
  return threads == 1 ? Exec::Serial : Exec::Parallel;
}

std::string output_dir(const Options& o, const mtopo::RunConfig& cfg) {
  const std::string dir = o.out.empty() ? cfg.output_dir : o.out;
  fs::create_directories(dir);
  return dir;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

int cmd_optimize(const Options& o) {
  const auto cfg = mtopo::parse_config(o.config);
  const Exec exec = setup_threads(o.threads);
  const std::string dir = output_dir(o, cfg);
  const auto problem = mtopo::make_problem(cfg, exec);
  if (!problem.filter.warning().empty()) std::cerr << "warning: " << problem.filter.warning() << '\n';

  const auto t0 = std::chrono::steady_clock::now();
  const auto progress = [&](const mtopo::HistoryRow& r) {
    if (o.quiet) return;
    std::fprintf(stderr, "it %4d  k %3d  c %.6e  max_g %+.4f  vol %.4f  mu %.3g  beta %.0f  dmax %.4f\n", r.iter,
                 r.outer_k, r.objective, r.max_g, r.volume_fraction, r.mu, r.beta, r.dmax);
  };
  const auto res = mtopo::run_optimization(problem, cfg.optimizer, {}, progress);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto& mesh = problem.model.mesh();
  const auto& ev = res.final;
  mtopo::write_density(dir + "/density.txt", mesh, ev.field.rho_bar);
  mtopo::write_density(dir + "/design.txt", mesh, res.rho);
  mtopo::write_vtk(dir + "/density.vtk", mesh,
                   {{"rho_bar", ev.field.rho_bar}, {"rho", res.rho}, {"von_mises", ev.von_mises}});
  if (mesh.dim == 2) mtopo::write_pgm(dir + "/density.pgm", mesh, ev.field.rho_bar);
  mtopo::write_matrix(dir + "/CH.txt", ev.CH.C);
  mtopo::write_history(dir + "/history.csv", res.history);
  mtopo::write_g_map(dir + "/g_map.txt", problem, ev);

  json s;
  s["objective"] = mtopo::to_string(cfg.objective);
  s["criterion"] = mtopo::to_string(cfg.criterion);
  s["converged"] = res.converged;
  s["iterations"] = res.history.size();
  s["outer_iterations"] = res.outer_iterations;
  s["returned_iteration"] = res.returned_iteration;
  s["c"] = ev.c;
  s["normalized_objective"] = ev.c_normalized;
  s["normalization"] = res.normalization;
  s["max_von_mises_mpa"] = ev.max_von_mises;
  s["stress_limit_mpa"] = cfg.stress_limit();
  s["max_g"] = ev.max_g;
  s["max_g_all_elements"] = ev.max_g_all;
  s["volume_fraction"] = ev.volume_fraction;
  s["target_volume_fraction"] = cfg.volume_fraction;
  s["beta"] = res.beta;
  s["mu"] = res.state.mu;
  s["wall_time_s"] = wall;
  s["CH_mpa"] = matrix_json(ev.CH.C);
  write_json(dir + "/summary.json", s);

  std::cout << (res.converged ? "converged" : "not converged") << " after " << res.history.size()
            << " iterations: c = " << ev.c << ", max von Mises = " << ev.max_von_mises
            << " MPa, volume = " << ev.volume_fraction << "\n";
  return res.converged ? kOk : kNotConverged;
}

int cmd_homogenize(const Options& o) {
  const auto cfg = mtopo::parse_config(o.config);
  const Exec exec = setup_threads(o.threads);
  const auto problem = mtopo::make_physical_problem(cfg, exec);
  const auto& mesh = problem.model.mesh();
  const std::vector<double> rho_bar =
      o.density.empty() ? std::vector<double>(mesh.num_elements, 1.0) : mtopo::load_density(o.density, mesh);
  const std::string dir = output_dir(o, cfg);
  const auto K = mtopo::assemble_stiffness(problem.model, rho_bar, problem.simp, exec);
  mtopo::CellSolver solver(problem.solver, mesh.dim, problem.model.num_equations());
  const auto sol = mtopo::solve_unit_cells(problem.model, K, solver, exec);
  const auto CH = mtopo::homogenized_matrix(problem.model, sol, mtopo::element_energies(problem.model, sol, exec), exec);
  mtopo::write_matrix(dir + "/CH.txt", CH.C);
  std::cout << CH.C << '\n';
  return kOk;
}

int cmd_evaluate(const Options& o) {
  const auto cfg = mtopo::parse_config(o.config);
  const Exec exec = setup_threads(o.threads);
  const auto problem = mtopo::make_physical_problem(cfg, exec);
  const auto& mesh = problem.model.mesh();
  const auto rho_bar = mtopo::load_density(o.density, mesh);
  const std::string dir = output_dir(o, cfg);
  mtopo::CellSolver solver(problem.solver, mesh.dim, problem.model.num_equations());
  const auto state = mtopo::ALState::initial(problem.num_stress(), 0.0, 1.0);
  const auto ev = mtopo::evaluate(problem, rho_bar, 0.0, state, solver);
  mtopo::write_g_map(dir + "/g_map.txt", problem, ev);
  mtopo::write_matrix(dir + "/CH.txt", ev.CH.C);
  json s;
  s["criterion"] = mtopo::to_string(cfg.criterion);
  s["c"] = ev.c;
  s["max_von_mises_mpa"] = ev.max_von_mises;
  s["max_g"] = ev.max_g;
  s["max_g_all_elements"] = ev.max_g_all;
  s["volume_fraction"] = ev.volume_fraction;
  s["CH_mpa"] = matrix_json(ev.CH.C);
  write_json(dir + "/evaluate.json", s);
  std::cout << "max von Mises " << ev.max_von_mises << " MPa, max g " << ev.max_g << ", volume "
            << ev.volume_fraction << '\n';
  return kOk;
}

int cmd_grad_check(const Options& o) {
  const auto cfg = mtopo::parse_config(o.config);
  const Exec exec = setup_threads(o.threads);
  auto problem = mtopo::make_problem(cfg, exec);
  const std::string dir = output_dir(o, cfg);
  const auto pt = mtopo::make_grad_check_point(problem, cfg.seed);

  mtopo::FdOptions fo;
  fo.probes = o.probes >= 0 ? o.probes : cfg.gradcheck.probes;
  fo.step = cfg.gradcheck.step;
  fo.beta = cfg.gradcheck.beta;
  fo.seed = cfg.seed;
  fo.corrupt = o.corrupt;
  fo.threshold = cfg.gradcheck.threshold > 0.0 ? cfg.gradcheck.threshold
                                               : (mtopo::is_fatigue(cfg.criterion) ? 5e-4 : 1e-4);
  {
    mtopo::CellSolver s(problem.solver, cfg.dim, problem.model.num_equations());
    const auto ev = mtopo::evaluate(problem, pt.rho, fo.beta, pt.state, s);
    problem.objective.normalization = std::abs(ev.c) > 1e-12 ? std::abs(ev.c) : 1.0;
  }
  const auto rep = mtopo::finite_difference_check(problem, pt.rho, pt.state, fo);
  rep.write(dir + "/gradcheck.txt");
  std::cout << "gradient check: max rel err " << rep.max_rel_err << " (threshold " << rep.threshold << ", "
            << rep.probes.size() - rep.skipped << " probes, " << rep.skipped << " skipped) "
            << (rep.passed ? "PASS" : "FAIL") << '\n';
  return rep.passed ? kOk : kGradCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stress- and fatigue-constrained topology optimization of periodic unit cells"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "OpenMP threads (1 = serial reference path)");
  app.add_option("--out", o.out, "output directory (overrides [output] directory)");

  auto* opt = app.add_subcommand("optimize", "run the augmented Lagrangian optimization");
  opt->add_option("config", o.config, "INI configuration")->required();
  opt->add_flag("-q,--quiet", o.quiet, "no per-iteration log");

  auto* hom = app.add_subcommand("homogenize", "effective matrix C^H of a density field (default all solid)");
  hom->add_option("config", o.config)->required();
  hom->add_option("--density", o.density, "flat density file (physical densities)");

  auto* gc = app.add_subcommand("grad-check", "adjoint gradient vs central finite differences");
  gc->add_option("config", o.config)->required();
  gc->add_option("--probes", o.probes, "number of probed design variables (0 = all)");
  gc->add_flag("--corrupt-gradient", o.corrupt)->group("");

  auto* evl = app.add_subcommand("evaluate", "per-element constraint values of a given design");
  evl->add_option("config", o.config)->required();
  evl->add_option("--density", o.density)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*opt) return cmd_optimize(o);
    if (*hom) return cmd_homogenize(o);
    if (*gc) return cmd_grad_check(o);
    if (*evl) return cmd_evaluate(o);
  } catch (const mtopo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const mtopo::InputShapeError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kShape;
  } catch (const mtopo::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
