#include "mtopo/alopt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtopo {

ObjectiveKind parse_objective(const std::string& name) {
  if (name == "bulk") return ObjectiveKind::BulkMax;
  if (name == "shear") return ObjectiveKind::ShearMax;
  if (name == "poisson") return ObjectiveKind::PoissonMin;
  throw std::invalid_argument("unknown objective '" + name + "' (expected bulk, shear, poisson)");
}

std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::BulkMax: return "bulk";
    case ObjectiveKind::ShearMax: return "shear";
    case ObjectiveKind::PoissonMin: return "poisson";
  }
  return "?";
}

OptimizerConfig OptimizerConfig::for_dimension(int dim) {
  OptimizerConfig c;
  if (dim == 3) c.mu0 = 100.0;
  return c;
}

void OptimizerConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("optimizer.") + name + " must be positive");
  };
  positive(penalty, "penalty");
  positive(ersatz, "ersatz");
  positive(mu0, "mu0");
  positive(mu_max, "mu_max");
  positive(filter_exponent, "filter_exponent");
  positive(filter_radius_cells, "filter_radius_cells");
  positive(delta, "delta");
  positive(delta_s, "delta_s");
  positive(move, "move");
  if (beta0 < 0.0 || beta_max < beta0) throw std::invalid_argument("optimizer: need 0 <= beta0 <= beta_max");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("optimizer.eta must lie in (0, 1)");
  if (!(alpha > 1.0)) throw std::invalid_argument("optimizer.alpha must exceed 1");
  if (mu0 > mu_max) throw std::invalid_argument("optimizer.mu0 exceeds mu_max");
  if (filter_exponent < 1.0) throw std::invalid_argument("optimizer.filter_exponent must be >= 1");
  if (!(asy_min > 0.0 && asy_min < 1.0)) throw std::invalid_argument("optimizer.asy_min must lie in (0, 1)");
  if (!(rho_min >= 0.0 && rho_min < 0.5)) throw std::invalid_argument("optimizer.rho_min must lie in [0, 0.5)");
  if (move > 1.0) throw std::invalid_argument("optimizer.move must not exceed 1");
  if (max_iter < 1 || max_inner < 1 || beta_interval < 1)
    throw std::invalid_argument("optimizer iteration limits must be >= 1");
  if (lambda0 < 0.0) throw std::invalid_argument("optimizer.lambda0 must be >= 0");
}

ALState ALState::initial(int num_stress, double lambda0, double mu0) {
  ALState s;
  s.lambda_s.assign(num_stress, lambda0);
  s.lambda_v = lambda0;
  s.lambda_iso = lambda0;
  s.mu = mu0;
  return s;
}

namespace {

int spatial_dim(const Eigen::MatrixXd& CH) {
  if (CH.rows() == 3 && CH.cols() == 3) return 2;
  if (CH.rows() == 6 && CH.cols() == 6) return 3;
  throw std::invalid_argument("homogenized matrix must be 3x3 or 6x6");
}

}  // namespace

double objective_value(const Eigen::MatrixXd& CH, ObjectiveKind kind) {
  const int D = spatial_dim(CH);
  const int d = static_cast<int>(CH.rows());
  switch (kind) {
    case ObjectiveKind::BulkMax:
      return -CH.topLeftCorner(D, D).sum();
    case ObjectiveKind::ShearMax: {
      double s = 0.0;
      for (int i = D; i < d; ++i) s += CH(i, i);
      return -s;
    }
    case ObjectiveKind::PoissonMin:
      if (!(CH(0, 0) > 0.0)) throw NumericalError("Poisson objective needs C11 > 0 (degenerate design)");
      return CH(0, 1) / CH(0, 0);
  }
  return 0.0;
}

Eigen::MatrixXd objective_partials(const Eigen::MatrixXd& CH, ObjectiveKind kind) {
  const int D = spatial_dim(CH);
  const int d = static_cast<int>(CH.rows());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
  switch (kind) {
    case ObjectiveKind::BulkMax:
      G.topLeftCorner(D, D).setConstant(-1.0);
      break;
    case ObjectiveKind::ShearMax:
      for (int i = D; i < d; ++i) G(i, i) = -1.0;
      break;
    case ObjectiveKind::PoissonMin:
      if (!(CH(0, 0) > 0.0)) throw NumericalError("Poisson objective needs C11 > 0 (degenerate design)");
      G(0, 1) = 1.0 / CH(0, 0);
      G(0, 0) = -CH(0, 1) / (CH(0, 0) * CH(0, 0));
      break;
  }
  return G;
}

StressPenalty stress_penalty(std::span<const double> rho_bar, std::span<const double> g,
                             const ALState& state, const Simp& simp) {
  const std::size_t N = rho_bar.size();
  if (N == 0 || g.size() % N != 0 || g.size() != state.lambda_s.size())
    throw std::invalid_argument("stress penalty: constraint count does not match loads x elements");
  StressPenalty out;
  out.h.resize(g.size());
  out.clamped.resize(g.size());
  for (std::size_t J = 0; J < g.size(); ++J) {
    const double w = simp.weight(rho_bar[J % N]);
    const double raw = w * (g[J] * g[J] * g[J] + g[J]);
    const double floor = -state.lambda_s[J] / state.mu;
    out.clamped[J] = raw < floor;
    out.h[J] = out.clamped[J] ? floor : raw;
    out.P += state.lambda_s[J] * out.h[J] + 0.5 * state.mu * out.h[J] * out.h[J];
  }
  return out;
}

namespace {

ScalarPenalty scalar_penalty(double raw, double lambda, double mu) {
  ScalarPenalty p;
  p.raw = raw;
  const double floor = -lambda / mu;
  p.clamped = raw < floor;
  p.h = p.clamped ? floor : raw;
  p.P = lambda * p.h + 0.5 * mu * p.h * p.h;
  return p;
}

// Ciso = T vec(C): row (i*d+j) of T gives the linear combination of C^H
// entries that defines C^iso_ij.
Eigen::MatrixXd isotropy_map(int d) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(d * d, d * d);
  auto at = [d](int i, int j) { return i * d + j; };
  if (d == 3) {
    for (int i = 0; i < 2; ++i) {
      T(at(i, i), at(0, 0)) = 0.5;
      T(at(i, i), at(1, 1)) = 0.5;
    }
    T(at(0, 1), at(0, 1)) = 1.0;
    T(at(1, 0), at(0, 1)) = 1.0;
    T(at(2, 2), at(0, 0)) = 0.25;
    T(at(2, 2), at(1, 1)) = 0.25;
    T(at(2, 2), at(0, 1)) = -0.5;
    return T;
  }
  const int upper[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) {
        for (int k = 0; k < 3; ++k) T(at(i, i), at(k, k)) = 1.0 / 3.0;
      } else {
        for (const auto& u : upper) T(at(i, j), at(u[0], u[1])) = 1.0 / 3.0;
      }
    }
  for (int i = 3; i < 6; ++i) {
    for (int k = 0; k < 3; ++k) T(at(i, i), at(k, k)) = 1.0 / 6.0;
    for (const auto& u : upper) T(at(i, i), at(u[0], u[1])) = -1.0 / 6.0;
  }
  return T;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& C) {
  const int d = static_cast<int>(C.rows());
  Eigen::VectorXd v(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) v(i * d + j) = C(i, j);
  return v;
}

}  // namespace

ScalarPenalty volume_penalty(std::span<const double> rho_bar, double vf, const ALState& state, bool equality) {
  if (!(vf > 0.0 && vf <= 1.0)) throw std::invalid_argument("volume fraction must lie in (0, 1]");
  double s = 0.0;
  for (double r : rho_bar) s += r;
  const double fraction = s / static_cast<double>(rho_bar.size());
  if (equality) {
    ScalarPenalty p;
    p.raw = p.h = fraction / vf - 1.0;
    p.P = state.lambda_v * p.h + 0.5 * state.mu * p.h * p.h;
    return p;
  }
  return scalar_penalty(fraction / vf - 1.0, state.lambda_v, state.mu);
}

Eigen::MatrixXd isotropic_reference(const Eigen::MatrixXd& CH) {
  const int d = static_cast<int>(CH.rows());
  spatial_dim(CH);
  const Eigen::VectorXd v = isotropy_map(d) * flatten(CH);
  Eigen::MatrixXd Ciso(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) Ciso(i, j) = v(i * d + j);
  return Ciso;
}

// Entries that are identically zero in C^iso have no scale of their own;
// they are normalized by C^iso_11 instead of by eps.
double isotropy_misfit(const Eigen::MatrixXd& CH, const Eigen::MatrixXd& Ciso, double eps) {
  const int d = static_cast<int>(CH.rows());
  const Eigen::MatrixXd T = isotropy_map(d);
  double m = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const bool structural = T.row(i * d + j).cwiseAbs().sum() > 0.0;
      const double scale = (structural ? Ciso(i, j) : Ciso(0, 0)) + eps;
      const double r = CH(i, j) - Ciso(i, j);
      m += r * r / (scale * scale);
    }
  return m;
}

double isotropy_misfit(const Eigen::MatrixXd& CH, Eigen::MatrixXd* dmisfit_dCH, double eps) {
  const int d = static_cast<int>(CH.rows());
  spatial_dim(CH);
  const Eigen::MatrixXd T = isotropy_map(d);
  const Eigen::MatrixXd Ciso = isotropic_reference(CH);
  const double m = isotropy_misfit(CH, Ciso, eps);
  if (dmisfit_dCH) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(d * d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const int row = i * d + j;
        const bool structural = T.row(row).cwiseAbs().sum() > 0.0;
        const int src = structural ? row : 0;
        const double scale = (structural ? Ciso(i, j) : Ciso(0, 0)) + eps;
        const double r = CH(i, j) - Ciso(i, j);
        // d(r^2 / scale^2) = 2 r dr / scale^2 - 2 r^2 dscale / scale^3
        Eigen::VectorXd dr = -T.row(row).transpose();
        dr(row) += 1.0;
        grad += (2.0 * r / (scale * scale)) * dr;
        grad -= (2.0 * r * r / (scale * scale * scale)) * T.row(src).transpose();
      }
    dmisfit_dCH->resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) (*dmisfit_dCH)(i, j) = grad(i * d + j);
  }
  return m;
}

ScalarPenalty isotropy_penalty(const Eigen::MatrixXd& CH, const ALState& state, double eps) {
  return scalar_penalty(isotropy_misfit(CH, nullptr, eps), state.lambda_iso, state.mu);
}

ALState update_multipliers(const ALState& state, std::span<const double> h_s, double h_v,
                           double h_iso, double alpha, double mu_max) {
  if (h_s.size() != state.lambda_s.size())
    throw std::invalid_argument("multiplier update: constraint count mismatch");
  ALState next = state;
  for (std::size_t J = 0; J < h_s.size(); ++J) next.lambda_s[J] += state.mu * h_s[J];
  next.lambda_v += state.mu * h_v;
  next.lambda_iso += state.mu * h_iso;
  next.mu = std::min(alpha * state.mu, mu_max);
  next.k = state.k + 1;
  return next;
}

}  // namespace mtopo
