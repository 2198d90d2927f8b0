#include "mtopo/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Dense>
#include <stdexcept>

namespace mtopo {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// 3x3 tensor from Voigt stress; 2D is embedded as plane stress.
std::array<std::array<double, 3>, 3> tensor(std::span<const double> s) {
  if (s.size() == 3) return {{{s[0], s[2], 0.0}, {s[2], s[1], 0.0}, {0.0, 0.0, 0.0}}};
  return {{{s[0], s[3], s[5]}, {s[3], s[1], s[4]}, {s[5], s[4], s[2]}}};
}

double bilinear(const std::array<double, 3>& u, const std::array<std::array<double, 3>, 3>& S,
                const std::array<double, 3>& v) {
  double r = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r += u[i] * S[i][j] * v[j];
  return r;
}

std::uint64_t sign_bits(double x) { return x > 0.0 ? 1u : (x < 0.0 ? 2u : 0u); }

BranchKey make_key(int plane, double s1, double s2, double s3, double s4) {
  return (static_cast<std::uint64_t>(plane + 1) << 8) | (sign_bits(s1) << 6) | (sign_bits(s2) << 4) |
         (sign_bits(s3) << 2) | sign_bits(s4);
}

// Linear maps from Voigt stress to (sigma_n, tau_na, tau_nb) on one plane.
void plane_rows(const PlaneBasis& p, int dim, double* cn, double* ca, double* cb) {
  if (dim == 2) {
    const double c2 = std::cos(2.0 * p.theta), s2 = std::sin(2.0 * p.theta);
    cn[0] = 0.5 * (1.0 + c2);
    cn[1] = 0.5 * (1.0 - c2);
    cn[2] = s2;
    ca[0] = ca[1] = ca[2] = 0.0;
    cb[0] = -0.5 * s2;
    cb[1] = 0.5 * s2;
    cb[2] = c2;
    return;
  }
  const auto& n = p.n;
  const auto& a = p.a;
  const auto& b = p.b;
  const double rn[6] = {n[0] * n[0], n[1] * n[1], n[2] * n[2], 2 * n[0] * n[1], 2 * n[1] * n[2], 2 * n[0] * n[2]};
  const double ra[6] = {n[0] * a[0], n[1] * a[1], n[2] * a[2], n[0] * a[1] + a[0] * n[1],
                        n[1] * a[2] + a[1] * n[2], n[0] * a[2] + a[0] * n[2]};
  const double rb[6] = {n[0] * b[0], n[1] * b[1], n[2] * b[2], n[0] * b[1] + b[0] * n[1],
                        n[1] * b[2] + b[1] * n[2], n[0] * b[2] + b[0] * n[2]};
  for (int i = 0; i < 6; ++i) {
    cn[i] = rn[i];
    ca[i] = ra[i];
    cb[i] = rb[i];
  }
}

}  // namespace

Criterion parse_criterion(const std::string& name) {
  if (name == "none") return Criterion::None;
  if (name == "vonmises" || name == "von_mises" || name == "vm") return Criterion::VonMises;
  if (name == "findley") return Criterion::Findley;
  if (name == "matake") return Criterion::Matake;
  if (name == "dangvan" || name == "dang_van") return Criterion::DangVan;
  throw std::invalid_argument("unknown criterion '" + name + "'");
}

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::None: return "none";
    case Criterion::VonMises: return "vonmises";
    case Criterion::Findley: return "findley";
    case Criterion::Matake: return "matake";
    case Criterion::DangVan: return "dangvan";
  }
  return "?";
}

bool is_fatigue(Criterion c) {
  return c == Criterion::Findley || c == Criterion::Matake || c == Criterion::DangVan;
}

FatigueParams fatigue_params(Criterion criterion, double f, double t) {
  if (!is_fatigue(criterion)) throw std::invalid_argument("not a fatigue criterion: " + to_string(criterion));
  if (!(f > 0.0 && t > 0.0)) throw std::invalid_argument("fatigue limits must be positive");
  const double r = f / t;
  if (!(r > 1.0 && r < 2.0))
    throw std::invalid_argument("criterion inapplicable: f_-1/t_-1 = " + std::to_string(r) +
                                " must lie in (1, 2)");
  FatigueParams p;
  p.criterion = criterion;
  p.f_minus1 = f;
  p.t_minus1 = t;
  switch (criterion) {
    case Criterion::Findley:
      p.alpha = (2.0 - r) / (2.0 * std::sqrt(r - 1.0));
      p.beta = f / (2.0 * std::sqrt(r - 1.0));
      break;
    case Criterion::Matake:
      p.alpha = 2.0 * t / f - 1.0;
      p.beta = t;
      break;
    case Criterion::DangVan:
      p.alpha = 3.0 * t / f - 1.5;
      p.beta = t;
      break;
    default: break;
  }
  return p;
}

double von_mises(std::span<const double> s) {
  if (s.size() == 3) return std::sqrt(std::max(0.0, s[0] * s[0] + s[1] * s[1] - s[0] * s[1] + 3.0 * s[2] * s[2]));
  const double q = s[0] * s[0] + s[1] * s[1] + s[2] * s[2] - s[0] * s[1] - s[1] * s[2] - s[0] * s[2] +
                   3.0 * (s[3] * s[3] + s[4] * s[4] + s[5] * s[5]);
  return std::sqrt(std::max(0.0, q));
}

double von_mises_g(std::span<const double> sigma, double sigma_bar) {
  if (!(sigma_bar > 0.0)) throw std::invalid_argument("stress limit must be positive");
  return von_mises(sigma) / sigma_bar - 1.0;
}

PlaneBasis PlaneBasis::spatial(double theta, double phi) {
  PlaneBasis p;
  p.theta = theta;
  p.phi = phi;
  const double st = std::sin(theta), ct = std::cos(theta), sp = std::sin(phi), cp = std::cos(phi);
  p.n = {st * cp, st * sp, ct};
  p.a = {sp, -cp, 0.0};
  p.b = {ct * cp, ct * sp, -st};
  return p;
}

PlaneBasis PlaneBasis::planar(double theta) {
  PlaneBasis p;
  p.theta = theta;
  const double s = std::sin(theta), c = std::cos(theta);
  p.n = {c, s, 0.0};
  p.a = {0.0, 0.0, 1.0};
  p.b = {-s, c, 0.0};
  return p;
}

PlaneStress transform_stress(std::span<const double> sigma, const PlaneBasis& plane, int dim) {
  const auto S = tensor(sigma);
  PlaneStress out;
  out.sigma_n = bilinear(plane.n, S, plane.n);
  out.tau_nb = bilinear(plane.b, S, plane.n);
  out.tau_na = dim == 3 ? bilinear(plane.a, S, plane.n) : 0.0;
  return out;
}

PlaneExtremes plane_cycle_extremes(const PlaneStress& mean, const PlaneStress& amp, int dim) {
  PlaneExtremes e;
  e.tau_a = dim == 2 ? std::abs(amp.tau_nb) : std::hypot(amp.tau_na, amp.tau_nb);
  e.sigma_n_max = mean.sigma_n + std::abs(amp.sigma_n);
  return e;
}

double hydrostatic_max(std::span<const double> mean, std::span<const double> amp) {
  auto trace = [](std::span<const double> s) { return s.size() == 3 ? s[0] + s[1] : s[0] + s[1] + s[2]; };
  return trace(mean) / 3.0 + std::abs(trace(amp) / 3.0);
}

PlaneGrid PlaneGrid::make(int dim, double dtheta_deg, double dphi_deg) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("plane grid dimension must be 2 or 3");
  auto divides = [](double range, double step) {
    if (!(step > 0.0)) return false;
    const double q = range / step;
    return std::abs(q - std::round(q)) < 1e-9 * q;
  };
  PlaneGrid g;
  g.dim_ = dim;
  g.dtheta_ = dtheta_deg;
  g.dphi_ = dphi_deg;
  const int nv = dim == 2 ? 3 : 6;
  if (dim == 2) {
    if (!divides(180.0, dtheta_deg)) throw std::invalid_argument("theta increment must divide 180 degrees");
    const int nt = static_cast<int>(std::lround(180.0 / dtheta_deg));
    for (int k = 0; k < nt; ++k) g.planes_.push_back(PlaneBasis::planar(k * dtheta_deg * kDeg));
  } else {
    if (!divides(90.0, dtheta_deg)) throw std::invalid_argument("theta increment must divide 90 degrees");
    if (!divides(360.0, dphi_deg)) throw std::invalid_argument("phi increment must divide 360 degrees");
    const int nt = static_cast<int>(std::lround(90.0 / dtheta_deg));
    const int np = static_cast<int>(std::lround(360.0 / dphi_deg));
    // At theta = 0 every phi names the same plane (the pole), and on the
    // equator phi and phi + 180 give opposite normals of one plane. Each
    // plane is kept once so the argmax never hops between copies.
    for (int i = 0; i <= nt; ++i) {
      const int count = i == 0 ? 1 : (i == nt ? (np + 1) / 2 : np);
      for (int j = 0; j < count; ++j)
        g.planes_.push_back(PlaneBasis::spatial(i * dtheta_deg * kDeg, j * dphi_deg * kDeg));
    }
  }
  const std::size_t m = g.planes_.size();
  g.cn_.resize(m * nv);
  g.ca_.resize(m * nv);
  g.cb_.resize(m * nv);
  for (std::size_t k = 0; k < m; ++k) plane_rows(g.planes_[k], dim, &g.cn_[k * nv], &g.ca_[k * nv], &g.cb_[k * nv]);
  return g;
}

namespace {

struct FatigueCore {
  CriticalPlaneResult result;
  ConstraintEval eval;
};

// Maximum shear amplitude planes of a proportional cycle in closed form:
// n = (e_max +- e_min) / sqrt(2) from the amplitude tensor's eigenvectors,
// and of those two the one with the larger sigma_n,max. Also returns the
// derivative of sigma_n,max through the motion of that plane. Fails on a
// repeated extreme eigenvalue, where the maximizing planes form a family.
struct ExactPlane {
  PlaneBasis basis;
  double pm = 1.0;
  std::array<double, 6> dsn_damp{};
};

template <int D>
std::optional<ExactPlane> exact_shear_plane(std::span<const double> mean, std::span<const double> amp) {
  using Mat = Eigen::Matrix<double, D, D>;
  using Vec = Eigen::Matrix<double, D, 1>;
  const auto T = tensor(amp), Tm = tensor(mean);
  Mat S, M;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) S(i, j) = T[i][j], M(i, j) = Tm[i][j];
  const Eigen::SelfAdjointEigenSolver<Mat> es(S);
  const Vec ev = es.eigenvalues();
  const Mat V = es.eigenvectors();
  const int hi = D - 1, lo = 0;
  const double spread = ev(hi) - ev(lo);
  if (!(spread > 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff()))) return std::nullopt;
  if (D == 3 && std::min(ev(2) - ev(1), ev(1) - ev(0)) <= 1e-6 * spread) return std::nullopt;

  ExactPlane out;
  Vec n = Vec::Zero();
  double best_sn = 0.0;
  for (double pm : {1.0, -1.0}) {
    const Vec c = (V.col(hi) + pm * V.col(lo)) / std::sqrt(2.0);
    const double sn = c.dot(M * c) + std::abs(c.dot(S * c));
    if (pm > 0.0 || sn > best_sn + 1e-12 * std::max(1.0, std::abs(best_sn))) {
      best_sn = sn;
      n = c;
      out.pm = pm;
    }
  }
  const double s_norm = sign(n.dot(S * n));
  const Vec w = 2.0 * (M + s_norm * S) * n;
  const int nv = D == 2 ? 3 : 6;
  static constexpr int vi[6] = {0, 1, 2, 0, 1, 0}, vj[6] = {0, 1, 2, 1, 2, 2};
  static constexpr int vi2[3] = {0, 1, 0}, vj2[3] = {0, 1, 1};
  for (int v = 0; v < nv; ++v) {
    Mat E = Mat::Zero();
    const int i = D == 2 ? vi2[v] : vi[v], j = D == 2 ? vj2[v] : vj[v];
    E(i, j) = E(j, i) = 1.0;
    auto de = [&](int m) {
      Vec d = Vec::Zero();
      for (int k = 0; k < D; ++k)
        if (k != m) d += V.col(k) * (V.col(k).dot(E * V.col(m)) / (ev(m) - ev(k)));
      return d;
    };
    out.dsn_damp[v] = w.dot((de(hi) + out.pm * de(lo)) / std::sqrt(2.0));
  }
  if (D == 2) {
    double theta = std::atan2(n(1), n(0));
    if (theta < 0.0) theta += std::numbers::pi;
    if (theta >= std::numbers::pi) theta -= std::numbers::pi;
    out.basis = PlaneBasis::planar(theta);
  } else {
    const double z = n(D - 1) < 0.0 ? -1.0 : 1.0;
    const double theta = std::acos(std::clamp(z * n(D - 1), -1.0, 1.0));
    double phi = std::atan2(z * n(1), z * n(0));
    if (phi < 0.0) phi += 2.0 * std::numbers::pi;
    out.basis = PlaneBasis::spatial(theta, phi);
  }
  return out;
}

FatigueCore fatigue_core(std::span<const double> mean, std::span<const double> amp,
                         const FatigueParams& prm, const PlaneGrid& grid) {
  const int nv = grid.voigt();
  const bool planar = grid.dim() == 2;
  const double sigma_h = hydrostatic_max(mean, amp);

  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  double best_tau = 0.0, best_sn = 0.0;
  for (int k = 0; k < grid.size(); ++k) {
    const double ta = dot(grid.shear_row_b(k), amp);
    const double tau_a = planar ? std::abs(ta) : std::hypot(dot(grid.shear_row_a(k), amp), ta);
    const double sn_max = dot(grid.normal_row(k), mean) + std::abs(dot(grid.normal_row(k), amp));
    if (prm.criterion == Criterion::Findley) {
      const double score = tau_a + prm.alpha * sn_max;
      if (best < 0 || score > best_score + 1e-12 * std::max(1.0, std::abs(best_score))) {
        best = k;
        best_score = score;
        best_tau = tau_a;
        best_sn = sn_max;
      }
    } else if (best < 0 || tau_a > best_tau + 1e-12 * std::max(1.0, best_tau)) {
      // Dang Van (and the Matake fallback): the plane of maximum shear amplitude
      best = k;
      best_tau = tau_a;
      best_sn = sn_max;
    }
  }

  PlaneBasis basis = grid.plane(best);
  std::array<double, 6> cn{}, ca{}, cb{}, dsn_motion{};
  double pm = 0.0;
  std::optional<ExactPlane> exact;
  if (prm.criterion == Criterion::Matake)
    exact = planar ? exact_shear_plane<2>(mean, amp) : exact_shear_plane<3>(mean, amp);
  if (exact) {
    // Matake reads sigma_n on the maximizing plane, so an off-grid plane
    // error would enter to first order; the closed form removes it.
    best = -1;
    basis = exact->basis;
    pm = exact->pm;
    dsn_motion = exact->dsn_damp;
    plane_rows(basis, grid.dim(), cn.data(), ca.data(), cb.data());
    const double tb = dot({cb.data(), std::size_t(nv)}, amp);
    best_tau = planar ? std::abs(tb) : std::hypot(dot({ca.data(), std::size_t(nv)}, amp), tb);
    best_sn = dot({cn.data(), std::size_t(nv)}, mean) + std::abs(dot({cn.data(), std::size_t(nv)}, amp));
  } else {
    if (prm.criterion == Criterion::Matake) {
      // Degenerate spectrum: a whole family of planes attains the maximum.
      // Grid planes within the grid resolution of it count as tied and the
      // larger normal stress wins.
      const double res = std::max(grid.dtheta_deg(), planar ? 0.0 : grid.dphi_deg()) * kDeg;
      const double floor = best_tau * std::cos(res) - 1e-12 * std::max(1.0, best_tau);
      for (int k = 0; k < grid.size(); ++k) {
        const double ta = dot(grid.shear_row_b(k), amp);
        const double tau_a = planar ? std::abs(ta) : std::hypot(dot(grid.shear_row_a(k), amp), ta);
        if (tau_a < floor) continue;
        const double sn_max = dot(grid.normal_row(k), mean) + std::abs(dot(grid.normal_row(k), amp));
        if (sn_max > best_sn + 1e-12 * std::max(1.0, std::abs(best_sn))) {
          best = k;
          best_tau = tau_a;
          best_sn = sn_max;
        }
      }
      basis = grid.plane(best);
    }
    std::copy_n(grid.normal_row(best).begin(), nv, cn.begin());
    std::copy_n(grid.shear_row_a(best).begin(), nv, ca.begin());
    std::copy_n(grid.shear_row_b(best).begin(), nv, cb.begin());
  }

  FatigueCore out;
  auto& r = out.result;
  r.plane = best;
  r.theta = basis.theta;
  r.phi = basis.phi;
  r.tau_a = best_tau;
  r.sigma_n_max = best_sn;
  r.sigma_h_max = sigma_h;
  r.measure = prm.criterion == Criterion::DangVan ? best_tau + prm.alpha * sigma_h : best_tau + prm.alpha * best_sn;
  r.g = r.measure / prm.beta - 1.0;

  auto& ev = out.eval;
  ev.g = r.g;
  const double inv_beta = 1.0 / prm.beta;

  // Shear amplitude term. The plane is a maximizer of tau_a, so its motion
  // does not contribute here.
  const double tb = dot({cb.data(), std::size_t(nv)}, amp);
  const double tna = planar ? 0.0 : dot({ca.data(), std::size_t(nv)}, amp);
  if (planar) {
    const double s = sign(tb);
    for (int i = 0; i < nv; ++i) ev.dg_damp[i] += inv_beta * s * cb[i];
  } else if (best_tau > 0.0) {
    for (int i = 0; i < nv; ++i) ev.dg_damp[i] += inv_beta * (tna * ca[i] + tb * cb[i]) / best_tau;
  }
  // Normal or hydrostatic term.
  double s_norm = 0.0;
  if (prm.criterion == Criterion::DangVan) {
    const double tr = planar ? amp[0] + amp[1] : amp[0] + amp[1] + amp[2];
    s_norm = sign(tr);
    for (int i = 0; i < (planar ? 2 : 3); ++i) {
      ev.dg_dmean[i] += inv_beta * prm.alpha / 3.0;
      ev.dg_damp[i] += inv_beta * prm.alpha * s_norm / 3.0;
    }
  } else {
    const double sna = dot({cn.data(), std::size_t(nv)}, amp);
    s_norm = sign(sna);
    for (int i = 0; i < nv; ++i) {
      ev.dg_dmean[i] += inv_beta * prm.alpha * cn[i];
      ev.dg_damp[i] += inv_beta * prm.alpha * (s_norm * cn[i] + dsn_motion[i]);
    }
  }
  // In 3D tau_a is smooth in both shear components; only the plane matters.
  ev.branch = planar ? make_key(best, tb, pm, s_norm, 0.0) : make_key(best, 0.0, pm, s_norm, 0.0);
  return out;
}

}  // namespace

CriticalPlaneResult critical_plane_g(std::span<const double> mean, std::span<const double> amp,
                                     const FatigueParams& params, const PlaneGrid& grid) {
  if (!is_fatigue(params.criterion)) throw std::invalid_argument("critical-plane search needs a fatigue criterion");
  if (!(params.beta > 0.0)) throw std::invalid_argument("fatigue limit beta must be positive");
  return fatigue_core(mean, amp, params, grid).result;
}

StressCriterion::StressCriterion(Criterion criterion, int dim, double yield_mpa, double f_minus1,
                                 double t_minus1, double dtheta_deg, double dphi_deg)
    : criterion_(criterion), dim_(dim), yield_(yield_mpa) {
  if (criterion == Criterion::None) throw std::invalid_argument("no constraint criterion selected");
  if (criterion == Criterion::VonMises) {
    if (!(yield_mpa > 0.0)) throw std::invalid_argument("stress limit must be positive");
  } else {
    params_ = fatigue_params(criterion, f_minus1, t_minus1);
    grid_ = PlaneGrid::make(dim, dtheta_deg, dphi_deg);
  }
}

double StressCriterion::g(std::span<const double> mean, std::span<const double> amp) const {
  return evaluate(mean, amp).g;
}

ConstraintEval StressCriterion::evaluate(std::span<const double> mean, std::span<const double> amp) const {
  return criterion_ == Criterion::VonMises ? eval_von_mises(mean, amp) : eval_fatigue(mean, amp);
}

ConstraintEval StressCriterion::eval_von_mises(std::span<const double> mean, std::span<const double> amp) const {
  const std::size_t nv = mean.size();
  std::array<double, 6> plus{}, minus{};
  bool cyclic = false;
  for (std::size_t i = 0; i < nv; ++i) {
    plus[i] = mean[i] + amp[i];
    minus[i] = mean[i] - amp[i];
    cyclic = cyclic || amp[i] != 0.0;
  }
  const double vp = von_mises({plus.data(), nv});
  const double vn = cyclic ? von_mises({minus.data(), nv}) : -1.0;
  const double s = vp >= vn ? 1.0 : -1.0;
  const auto& sig = s > 0 ? plus : minus;
  const double vm = std::max(vp, vn);

  ConstraintEval ev;
  ev.g = vm / yield_ - 1.0;
  ev.branch = make_key(0, s, 0.0, 0.0, 0.0);
  if (vm <= 0.0) return ev;
  std::array<double, 6> d{};
  if (nv == 3) {
    d[0] = (2.0 * sig[0] - sig[1]) / (2.0 * vm);
    d[1] = (2.0 * sig[1] - sig[0]) / (2.0 * vm);
    d[2] = 3.0 * sig[2] / vm;
  } else {
    d[0] = (sig[0] - 0.5 * (sig[1] + sig[2])) / vm;
    d[1] = (sig[1] - 0.5 * (sig[0] + sig[2])) / vm;
    d[2] = (sig[2] - 0.5 * (sig[0] + sig[1])) / vm;
    for (int i = 3; i < 6; ++i) d[i] = 3.0 * sig[i] / vm;
  }
  for (std::size_t i = 0; i < nv; ++i) {
    ev.dg_dmean[i] = d[i] / yield_;
    ev.dg_damp[i] = cyclic ? s * d[i] / yield_ : 0.0;
  }
  return ev;
}

ConstraintEval StressCriterion::eval_fatigue(std::span<const double> mean, std::span<const double> amp) const {
  return fatigue_core(mean, amp, params_, grid_).eval;
}

}  // namespace mtopo
