#include "mtopo/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace mtopo {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kSchema = {
    {"mesh", {"dim", "resolution", "side_mm"}},
    {"material", {"youngs_gpa", "poisson", "yield_mpa", "f_minus1_mpa", "t_minus1_mpa"}},
    {"problem",
     {"objective", "volume_fraction", "criterion", "stress_limit_mpa", "dtheta_deg", "dphi_deg", "filter",
      "solver", "volume_constraint", "seed"}},
    {"optimizer",
     {"penalty", "ersatz", "beta0", "beta_max", "beta_step", "beta_interval", "eta", "mu0", "lambda0", "mu_max",
      "alpha", "filter_exponent", "filter_radius_cells", "delta", "delta_s", "move", "asy_min", "rho_min", "estimate_lambda_v", "max_iter",
      "max_inner"}},
    {"gradcheck", {"probes", "step", "threshold", "beta"}},
    {"output", {"directory"}},
};
const std::set<std::string> kLoadKeys = {"type", "strain_percent", "mean_percent", "amplitude_percent"};

class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    return tree_->find(key)->second.data();
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string s = text(key, "");
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (s.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(path(key), "expected a number, got '" + s + "'");
    }
  }

  long integer(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const std::string s = text(key, "");
    try {
      std::size_t used = 0;
      const long v = std::stol(s, &used);
      if (s.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(path(key), "expected an integer, got '" + s + "'");
    }
  }

  std::vector<double> numbers(const std::string& key) const {
    std::string s = text(key, "");
    for (char& ch : s)
      if (ch == ',') ch = ' ';
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError(path(key), "expected a list of numbers, got '" + text(key, "") + "'");
      }
    }
    return out;
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

 private:
  std::string name_;
  const pt::ptree* tree_;
};

Section section(const pt::ptree& root, const std::string& name) {
  const auto it = root.find(name);
  return Section(name, it == root.not_found() ? nullptr : &it->second);
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

Eigen::VectorXd strain_vector(const Section& s, const std::string& key, int voigt, bool required) {
  if (!s.has(key)) {
    require(!required, s.path(key), "missing strain vector");
    return Eigen::VectorXd::Zero(voigt);
  }
  const auto v = s.numbers(key);
  require(static_cast<int>(v.size()) == voigt, s.path(key),
          "expected " + std::to_string(voigt) + " Voigt components for this dimension, got " +
              std::to_string(v.size()));
  Eigen::VectorXd out(voigt);
  for (int i = 0; i < voigt; ++i) out[i] = v[i] / 100.0;
  return out;
}

RunConfig from_tree(const pt::ptree& root) {
  for (const auto& [name, sec] : root) {
    if (!sec.data().empty() && sec.empty()) throw ConfigError(name, "key outside of any section");
    const bool is_load = name.rfind("load.", 0) == 0;
    if (is_load) {
      require(name.size() > 5, name, "load section needs an id, e.g. [load.shear]");
      for (const auto& kv : sec)
        require(kLoadKeys.count(kv.first) > 0, name + "." + kv.first, "unknown key");
      continue;
    }
    const auto it = kSchema.find(name);
    require(it != kSchema.end(), name, "unknown section");
    for (const auto& kv : sec) require(it->second.count(kv.first) > 0, name + "." + kv.first, "unknown key");
  }

  RunConfig c;
  const Section mesh = section(root, "mesh");
  c.dim = static_cast<int>(mesh.integer("dim", 2));
  require(c.dim == 2 || c.dim == 3, "mesh.dim", "must be 2 or 3");
  c.resolution = static_cast<int>(mesh.integer("resolution", c.dim == 2 ? 60 : 16));
  require(c.resolution >= 2, "mesh.resolution", "must be >= 2");
  c.side_mm = mesh.number("side_mm", 10.0);
  require(c.side_mm > 0.0, "mesh.side_mm", "must be positive");

  const Section mat = section(root, "material");
  c.material.youngs_gpa = mat.number("youngs_gpa", c.material.youngs_gpa);
  c.material.poisson = mat.number("poisson", c.material.poisson);
  c.material.yield_mpa = mat.number("yield_mpa", c.material.yield_mpa);
  c.material.f_minus1_mpa = mat.number("f_minus1_mpa", c.material.f_minus1_mpa);
  c.material.t_minus1_mpa = mat.number("t_minus1_mpa", c.material.t_minus1_mpa);
  require(c.material.youngs_gpa > 0.0, "material.youngs_gpa", "must be positive");
  require(c.material.poisson > 0.0 && c.material.poisson < 0.5, "material.poisson", "must lie in (0, 0.5)");
  require(c.material.yield_mpa > 0.0, "material.yield_mpa", "must be positive");

  const Section prob = section(root, "problem");
  try {
    c.objective = parse_objective(prob.text("objective", "bulk"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("problem.objective", e.what());
  }
  try {
    c.criterion = parse_criterion(prob.text("criterion", "vonmises"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("problem.criterion", e.what());
  }
  c.volume_fraction = prob.number("volume_fraction", 0.5);
  require(c.volume_fraction > 0.0 && c.volume_fraction <= 1.0, "problem.volume_fraction", "must lie in (0, 1]");
  c.stress_limit_mpa = prob.number("stress_limit_mpa", 0.0);
  require(c.stress_limit_mpa >= 0.0, "problem.stress_limit_mpa", "must be positive (or 0 for the yield stress)");
  c.dtheta_deg = prob.number("dtheta_deg", c.dim == 2 ? 1.0 : 5.0);
  c.dphi_deg = prob.number("dphi_deg", 5.0);
  const std::string filter = prob.text("filter", "density_weighted");
  require(filter == "density_weighted" || filter == "linear", "problem.filter",
          "expected density_weighted or linear");
  c.filter = filter == "linear" ? FilterKind::Linear : FilterKind::DensityWeighted;
  const std::string solver = prob.text("solver", "auto");
  require(solver == "auto" || solver == "direct" || solver == "cg", "problem.solver", "expected auto, direct or cg");
  c.solver = solver == "direct" ? SolverKind::Direct : solver == "cg" ? SolverKind::ConjugateGradient : SolverKind::Auto;
  const std::string vc = prob.text("volume_constraint", "equality");
  require(vc == "equality" || vc == "inequality", "problem.volume_constraint", "expected equality or inequality");
  c.volume_equality = vc == "equality";
  const long seed = prob.integer("seed", 1);
  require(seed >= 0, "problem.seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);

  if (c.criterion != Criterion::None) {
    try {
      StressCriterion(c.criterion, c.dim, c.stress_limit(), c.material.f_minus1_mpa, c.material.t_minus1_mpa,
                      c.dtheta_deg, c.dphi_deg);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("problem.criterion", e.what());
    }
  }

  const int voigt = c.dim == 2 ? 3 : 6;
  for (const auto& [name, sec] : root) {
    if (name.rfind("load.", 0) != 0) continue;
    const Section s(name, &sec);
    const std::string id = name.substr(5);
    const std::string type = s.text("type", "static");
    if (type == "static") {
      require(!s.has("mean_percent") && !s.has("amplitude_percent"), name,
              "static loads take strain_percent only");
      c.loads.push_back(LoadCase::make_static(id, strain_vector(s, "strain_percent", voigt, true)));
    } else if (type == "sinusoid") {
      require(!s.has("strain_percent"), s.path("strain_percent"), "sinusoid loads take mean_percent/amplitude_percent");
      c.loads.push_back(LoadCase::make_sinusoid(id, strain_vector(s, "mean_percent", voigt, false),
                                                strain_vector(s, "amplitude_percent", voigt, true)));
    } else {
      throw ConfigError(s.path("type"), "expected static or sinusoid");
    }
  }
  require(!c.loads.empty(), "load", "at least one [load.<id>] section is required");

  OptimizerConfig& o = c.optimizer;
  o = OptimizerConfig::for_dimension(c.dim);
  const Section opt = section(root, "optimizer");
  o.penalty = opt.number("penalty", o.penalty);
  o.ersatz = opt.number("ersatz", o.ersatz);
  o.beta0 = opt.number("beta0", o.beta0);
  o.beta_max = opt.number("beta_max", o.beta_max);
  o.beta_step = opt.number("beta_step", o.beta_step);
  o.beta_interval = static_cast<int>(opt.integer("beta_interval", o.beta_interval));
  o.eta = opt.number("eta", o.eta);
  o.mu0 = opt.number("mu0", o.mu0);
  o.lambda0 = opt.number("lambda0", o.lambda0);
  o.mu_max = opt.number("mu_max", o.mu_max);
  o.alpha = opt.number("alpha", o.alpha);
  o.filter_exponent = opt.number("filter_exponent", o.filter_exponent);
  o.filter_radius_cells = opt.number("filter_radius_cells", o.filter_radius_cells);
  o.delta = opt.number("delta", o.delta);
  o.delta_s = opt.number("delta_s", o.delta_s);
  o.move = opt.number("move", o.move);
  o.rho_min = opt.number("rho_min", o.rho_min);
  o.asy_min = opt.number("asy_min", o.asy_min);
  const std::string est = opt.text("estimate_lambda_v", "true");
  require(est == "true" || est == "false", "optimizer.estimate_lambda_v", "expected true or false");
  o.estimate_lambda_v = est == "true";
  o.max_iter = static_cast<int>(opt.integer("max_iter", o.max_iter));
  o.max_inner = static_cast<int>(opt.integer("max_inner", o.max_inner));
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("optimizer", e.what());
  }

  const Section gc = section(root, "gradcheck");
  c.gradcheck.probes = static_cast<int>(gc.integer("probes", 0));
  c.gradcheck.step = gc.number("step", 1e-6);
  c.gradcheck.threshold = gc.number("threshold", -1.0);
  c.gradcheck.beta = gc.number("beta", 2.0);
  require(c.gradcheck.probes >= 0, "gradcheck.probes", "must be >= 0");
  require(c.gradcheck.step > 0.0 && c.gradcheck.step < 0.05, "gradcheck.step", "must lie in (0, 0.05)");
  require(c.gradcheck.beta >= 0.0, "gradcheck.beta", "must be >= 0");

  c.output_dir = section(root, "output").text("directory", "out");
  return c;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  pt::ptree root;
  std::istringstream in(text);
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  return from_tree(root);
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

Problem base_problem(const RunConfig& cfg, Exec exec, FilterOperator filter) {
  RucMesh mesh = build_mesh(cfg.dim, cfg.resolution, cfg.side_mm);
  Problem p(UnitCellModel(std::move(mesh), Material{cfg.material.youngs_gpa * 1000.0, cfg.material.poisson}),
            std::move(filter));
  p.simp = Simp{cfg.optimizer.penalty, cfg.optimizer.ersatz};
  p.eta = cfg.optimizer.eta;
  p.objective.kind = cfg.objective;
  p.volume_fraction = cfg.volume_fraction;
  p.volume_equality = cfg.volume_equality;
  if (cfg.criterion != Criterion::None)
    p.criterion = StressCriterion(cfg.criterion, cfg.dim, cfg.stress_limit(), cfg.material.f_minus1_mpa,
                                  cfg.material.t_minus1_mpa, cfg.dtheta_deg, cfg.dphi_deg);
  p.stress_limit = cfg.stress_limit();
  p.loads = cfg.loads;
  p.exec = exec;
  p.solver = cfg.solver;
  return p;
}

}  // namespace

Problem make_problem(const RunConfig& cfg, Exec exec) {
  const RucMesh mesh = build_mesh(cfg.dim, cfg.resolution, cfg.side_mm);
  FilterOperator filter = build_filter(mesh, cfg.optimizer.filter_radius_cells * mesh.cell_size,
                                       cfg.optimizer.filter_exponent, true, cfg.filter);
  return base_problem(cfg, exec, std::move(filter));
}

Problem make_physical_problem(const RunConfig& cfg, Exec exec) {
  const RucMesh mesh = build_mesh(cfg.dim, cfg.resolution, cfg.side_mm);
  FilterOperator::RowSparse I(mesh.num_elements, mesh.num_elements);
  I.setIdentity();
  return base_problem(cfg, exec, FilterOperator(std::move(I), 0.0, 1.0, true, FilterKind::Linear));
}

}  // namespace mtopo
