#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mtopo/criteria.hpp"

using namespace mtopo;

namespace {

const double kPi = std::numbers::pi;

// Brute-force critical-plane measure for a plane-stress cycle, independent of
// PlaneGrid: scan theta, evaluate the shear and normal stress histories on a
// dense time grid.
double brute_force_2d(const std::array<double, 3>& m, const std::array<double, 3>& a, double alpha,
                      bool matake, double step_deg) {
  double best_key = -1e300, best_measure = 0.0;
  for (double th = 0.0; th < 180.0; th += step_deg) {
    const double c = std::cos(th * kPi / 180.0), s = std::sin(th * kPi / 180.0);
    double tmin = 1e300, tmax = -1e300, nmax = -1e300;
    for (int k = 0; k < 720; ++k) {
      const double w = std::sin(2 * kPi * k / 720.0);
      const double sx = m[0] + w * a[0], sy = m[1] + w * a[1], txy = m[2] + w * a[2];
      const double sn = sx * c * c + sy * s * s + 2 * txy * s * c;
      const double tau = (sy - sx) * s * c + txy * (c * c - s * s);
      tmin = std::min(tmin, tau);
      tmax = std::max(tmax, tau);
      nmax = std::max(nmax, sn);
    }
    const double ta = 0.5 * (tmax - tmin);
    const double measure = ta + alpha * nmax;
    const double key = matake ? ta : measure;
    if (key > best_key + 1e-12 || (matake && std::abs(key - best_key) <= 1e-12 && measure > best_measure)) {
      best_key = key;
      best_measure = measure;
    }
  }
  return best_measure;
}

}  // namespace

TEST_CASE("von Mises") {
  const std::array<double, 6> uni = {972, 0, 0, 0, 0, 0};
  CHECK(von_mises_g(uni, 972.0) == doctest::Approx(0.0).scale(1.0));
  const std::array<double, 6> shear = {0, 0, 0, 561.18, 0, 0};
  CHECK(von_mises(shear) == doctest::Approx(std::sqrt(3.0) * 561.18));
  CHECK(std::abs(von_mises_g(shear, 972.0)) < 1e-4);
  const std::array<double, 6> hydro = {50, 50, 50, 0, 0, 0};
  CHECK(von_mises_g(hydro, 972.0) == doctest::Approx(-1.0));
  const std::array<double, 3> plane = {100, -40, 30};
  CHECK(von_mises(plane) == doctest::Approx(std::sqrt(100.0 * 100 + 1600 + 4000 + 3 * 900)));
}

TEST_CASE("fatigue calibration") {
  const auto f = fatigue_params(Criterion::Findley, 454, 300);
  CHECK(f.alpha == doctest::Approx(0.33962673679544181).epsilon(1e-14));
  CHECK(f.beta == doctest::Approx(316.8298736406793).epsilon(1e-14));
  CHECK(f.alpha > 0.3);
  CHECK(f.alpha < 0.4);
  const auto m = fatigue_params(Criterion::Matake, 454, 300);
  CHECK(m.alpha == doctest::Approx(2.0 * 300 / 454 - 1).epsilon(1e-15));
  CHECK(m.beta == 300.0);
  const auto d = fatigue_params(Criterion::DangVan, 454, 300);
  CHECK(d.alpha == doctest::Approx(3.0 * 300 / 454 - 1.5).epsilon(1e-15));
  CHECK(d.beta == 300.0);
  CHECK_THROWS_AS(fatigue_params(Criterion::Findley, 700, 300), std::invalid_argument);
  CHECK_THROWS_AS(fatigue_params(Criterion::VonMises, 454, 300), std::invalid_argument);
}

TEST_CASE("plane projections") {
  const std::array<double, 3> uni = {200, 0, 0};
  auto p0 = transform_stress(uni, PlaneBasis::planar(0.0), 2);
  CHECK(p0.sigma_n == doctest::Approx(200));
  CHECK(p0.tau_nb == doctest::Approx(0).scale(1));
  auto p45 = transform_stress(uni, PlaneBasis::planar(kPi / 4), 2);
  CHECK(p45.sigma_n == doctest::Approx(100));
  CHECK(p45.tau_nb == doctest::Approx(-100));
  const std::array<double, 6> hydro = {70, 70, 70, 0, 0, 0};
  for (double th : {0.3, 1.1, 2.0})
    for (double ph : {0.0, 0.7, 2.5}) {
      const auto p = transform_stress(hydro, PlaneBasis::spatial(th, ph), 3);
      CHECK(p.sigma_n == doctest::Approx(70));
      CHECK(std::abs(p.tau_na) < 1e-12);
      CHECK(std::abs(p.tau_nb) < 1e-12);
    }
}

TEST_CASE("cycle extremes") {
  const std::array<double, 3> zero = {0, 0, 0}, amp = {200, 0, 0};
  const auto plane = PlaneBasis::planar(kPi / 4);
  const auto e = plane_cycle_extremes(transform_stress(zero, plane, 2), transform_stress(amp, plane, 2), 2);
  CHECK(e.tau_a == doctest::Approx(100));
  CHECK(e.sigma_n_max == doctest::Approx(100));
  const std::array<double, 3> mean = {100, 0, 0}, amp2 = {50, 0, 0};
  const auto p0 = PlaneBasis::planar(0.0);
  const auto e2 = plane_cycle_extremes(transform_stress(mean, p0, 2), transform_stress(amp2, p0, 2), 2);
  CHECK(e2.sigma_n_max == doctest::Approx(150));
  const auto st = plane_cycle_extremes(transform_stress(mean, p0, 2), transform_stress(zero, p0, 2), 2);
  CHECK(st.tau_a == 0.0);
  CHECK(st.sigma_n_max == doctest::Approx(100));
}

TEST_CASE("hydrostatic maximum") {
  const std::array<double, 6> z6 = {0, 0, 0, 0, 0, 0}, h6 = {80, 80, 80, 0, 0, 0};
  CHECK(hydrostatic_max(z6, h6) == doctest::Approx(80));
  const std::array<double, 3> z3 = {0, 0, 0}, sh = {0, 0, 120}, ux = {90, 0, 0};
  CHECK(hydrostatic_max(z3, sh) == doctest::Approx(0).scale(1));
  CHECK(hydrostatic_max(z3, ux) == doctest::Approx(30));
}

TEST_CASE("torsion calibration gives g = 0") {
  for (int dim : {2, 3})
    for (Criterion c : {Criterion::Findley, Criterion::Matake, Criterion::DangVan}) {
      const StressCriterion sc(c, dim, 972, 454, 300, dim == 2 ? 0.1 : 5.0, 5.0);
      std::vector<double> mean(dim == 2 ? 3 : 6, 0.0), amp(mean.size(), 0.0);
      amp[dim == 2 ? 2 : 3] = 300.0;
      CAPTURE(dim);
      CAPTURE(to_string(c));
      CHECK(std::abs(sc.g(mean, amp)) < 1e-3);
    }
}

TEST_CASE("bending calibration for Findley") {
  const StressCriterion sc(Criterion::Findley, 2, 972, 454, 300, 1.0, 5.0);
  const std::array<double, 3> zero = {0, 0, 0}, amp = {454, 0, 0};
  CHECK(std::abs(sc.g(zero, amp)) < 2e-3);
  const StressCriterion sc3(Criterion::Findley, 3, 972, 454, 300, 1.0, 1.0);
  const std::array<double, 6> z6 = {0, 0, 0, 0, 0, 0}, a6 = {454, 0, 0, 0, 0, 0};
  CHECK(std::abs(sc3.g(z6, a6)) < 2e-3);
}

TEST_CASE("zero stress gives g = -1") {
  for (Criterion c : {Criterion::VonMises, Criterion::Findley, Criterion::Matake, Criterion::DangVan}) {
    const StressCriterion sc(c, 2, 972, 454, 300, 1.0, 5.0);
    const std::array<double, 3> z = {0, 0, 0};
    CHECK(sc.g(z, z) == doctest::Approx(-1.0));
  }
}

TEST_CASE("grid search against a brute-force scan") {
  const auto pf = fatigue_params(Criterion::Findley, 454, 300);
  const auto pm = fatigue_params(Criterion::Matake, 454, 300);
  const StressCriterion f(Criterion::Findley, 2, 972, 454, 300, 0.5, 5.0);
  const StressCriterion m(Criterion::Matake, 2, 972, 454, 300, 0.5, 5.0);
  const std::array<std::array<double, 3>, 3> means = {{{40, -20, 10}, {0, 0, 0}, {120, 60, -30}}};
  const std::array<std::array<double, 3>, 3> amps = {{{150, 30, 60}, {0, 0, 250}, {80, -90, 40}}};
  for (int k = 0; k < 3; ++k) {
    const double bf = brute_force_2d(means[k], amps[k], pf.alpha, false, 0.05);
    CHECK((f.g(means[k], amps[k]) + 1.0) * pf.beta == doctest::Approx(bf).epsilon(2e-3));
    const double bm = brute_force_2d(means[k], amps[k], pm.alpha, true, 0.05);
    CHECK((m.g(means[k], amps[k]) + 1.0) * pm.beta == doctest::Approx(bm).epsilon(5e-3));
  }
}

TEST_CASE("grid refinement is stable") {
  const std::array<double, 6> mean = {30, -10, 5, 12, -8, 4}, amp = {120, 40, -30, 60, 25, -15};
  double prev = 0.0;
  for (double step : {5.0, 2.5, 1.25}) {
    const StressCriterion sc(Criterion::Findley, 3, 972, 454, 300, step, step);
    const double g = sc.g(mean, amp);
    if (step < 5.0) CHECK(std::abs(g - prev) < 5e-3);
    prev = g;
  }
}

TEST_CASE("3D grid has no duplicate planes") {
  const PlaneGrid grid = PlaneGrid::make(3, 10.0, 10.0);
  for (int i = 0; i < grid.size(); ++i)
    for (int j = i + 1; j < grid.size(); ++j) {
      const auto& a = grid.plane(i).n;
      const auto& b = grid.plane(j).n;
      const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
      CHECK(std::abs(dot) < 1.0 - 1e-9);
    }
}

TEST_CASE("criteria agree under pure shear cycling") {
  const std::array<double, 3> z = {0, 0, 0}, amp = {0, 0, 250};
  const StressCriterion f(Criterion::Findley, 2, 972, 454, 300, 1.0, 5.0);
  const StressCriterion m(Criterion::Matake, 2, 972, 454, 300, 1.0, 5.0);
  const StressCriterion d(Criterion::DangVan, 2, 972, 454, 300, 1.0, 5.0);
  const double gf = f.g(z, amp), gm = m.g(z, amp), gd = d.g(z, amp);
  CHECK(std::abs(gm - gd) < 1e-12);
  CHECK(std::abs(gf - gm) < 0.05 * std::abs(gm + 1.0));
}

TEST_CASE("Matake plane does not depend on the grid") {
  const std::array<double, 6> mean = {30, -10, 5, 12, -8, 4}, amp = {120, 40, -30, 60, 25, -15};
  const StressCriterion coarse(Criterion::Matake, 3, 972, 454, 300, 10.0, 10.0);
  const StressCriterion fine(Criterion::Matake, 3, 972, 454, 300, 1.0, 1.0);
  CHECK(coarse.g(mean, amp) == doctest::Approx(fine.g(mean, amp)).epsilon(1e-12));
  // max shear amplitude is half the spread of the amplitude eigenvalues
  const auto r = critical_plane_g(mean, amp, coarse.fatigue(), coarse.grid());
  Eigen::Matrix3d S;
  S << 120, 60, -15, 60, 40, 25, -15, 25, -30;
  const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(S).eigenvalues();
  CHECK(r.tau_a == doctest::Approx(0.5 * (ev(2) - ev(0))).epsilon(1e-12));
}

TEST_CASE("fatigue gradients against central differences") {
  int compared = 0;
  auto check = [&](const StressCriterion& sc, std::vector<double> mean, std::vector<double> amp) {
    const ConstraintEval e = sc.evaluate(mean, amp);
    const double h = 1e-4;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      for (int which = 0; which < 2; ++which) {
        auto& v = which == 0 ? mean : amp;
        const double v0 = v[i];
        v[i] = v0 + h;
        const ConstraintEval ep = sc.evaluate(mean, amp);
        v[i] = v0 - h;
        const ConstraintEval em = sc.evaluate(mean, amp);
        v[i] = v0;
        // a probe that crosses a critical-plane switch has no derivative to compare
        if (ep.branch != e.branch || em.branch != e.branch) continue;
        const double gp = ep.g, gm = em.g;
        const double fd = (gp - gm) / (2 * h);
        const double an = which == 0 ? e.dg_dmean[i] : e.dg_damp[i];
        CAPTURE(to_string(sc.criterion()));
        CAPTURE(i);
        CAPTURE(which);
        CHECK(an == doctest::Approx(fd).epsilon(1e-6).scale(1e-3));
        ++compared;
      }
    }
  };
  for (Criterion c : {Criterion::Findley, Criterion::Matake, Criterion::DangVan}) {
    check(StressCriterion(c, 2, 972, 454, 300, 1.0, 5.0), {40, -20, 10}, {150, 30, 60});
    check(StressCriterion(c, 3, 972, 454, 300, 5.0, 5.0), {30, -10, 5, 12, -8, 4}, {120, 40, -30, 60, 25, -15});
  }
  CHECK(compared >= 45);
}
