#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtopo/adjoint.hpp"
#include "mtopo/alopt.hpp"
#include "mtopo/criteria.hpp"
#include "mtopo/field.hpp"
#include "mtopo/homogenize.hpp"

namespace mtopo {

/// Invalid configuration. `field` is the dotted key path (section.key).
struct ConfigError : std::runtime_error {
  ConfigError(std::string field_path, const std::string& what)
      : std::runtime_error(field_path + ": " + what), field(std::move(field_path)) {}
  std::string field;
};

struct MaterialConfig {
  double youngs_gpa = 108.8;
  double poisson = 0.29;
  double yield_mpa = 972.0;
  double f_minus1_mpa = 454.0;
  double t_minus1_mpa = 300.0;
};

struct GradCheckConfig {
  int probes = 0;  // 0: every design variable
  double step = 1e-6;
  double threshold = -1.0;  // < 0: 1e-4 for von Mises / none, 5e-4 for fatigue
  double beta = 2.0;
};

struct RunConfig {
  int dim = 2;
  int resolution = 60;
  double side_mm = 10.0;
  MaterialConfig material;
  ObjectiveKind objective = ObjectiveKind::BulkMax;
  double volume_fraction = 0.5;
  Criterion criterion = Criterion::VonMises;
  double stress_limit_mpa = 0.0;  // 0: material yield
  double dtheta_deg = 1.0;
  double dphi_deg = 5.0;
  FilterKind filter = FilterKind::DensityWeighted;
  SolverKind solver = SolverKind::Auto;
  bool volume_equality = true;
  std::uint64_t seed = 1;
  std::vector<LoadCase> loads;  // absolute strains
  OptimizerConfig optimizer;
  GradCheckConfig gradcheck;
  std::string output_dir = "out";

  double stress_limit() const { return stress_limit_mpa > 0.0 ? stress_limit_mpa : material.yield_mpa; }
};

/// Reads an INI-style file. Unknown sections or keys, malformed values and
/// strain vectors of the wrong length raise ConfigError.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Builds the fixed part of the optimization problem.
Problem make_problem(const RunConfig& cfg, Exec exec);

/// Problem whose field chain is the identity (linear identity filter,
/// beta = 0): the design vector is interpreted as physical density.
Problem make_physical_problem(const RunConfig& cfg, Exec exec);

}  // namespace mtopo
