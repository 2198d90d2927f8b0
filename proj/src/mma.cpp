#include "mtopo/mma.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtopo/homogenize.hpp"

namespace mtopo {

Mma::Mma(int n, MmaSettings settings, double xmin, double xmax)
    : s_(settings), xmin_(xmin), xmax_(xmax), xold1_(n), xold2_(n), low_(n), upp_(n) {}

std::vector<double> Mma::step(std::span<const double> x, std::span<const double> grad) {
  const std::size_t n = x.size();
  for (std::size_t j = 0; j < n; ++j)
    if (!std::isfinite(grad[j]))
      throw NumericalError("non-finite gradient entry at design variable " + std::to_string(j));

  ++iter_;
  const double range = xmax_ - xmin_;
  if (iter_ <= 2) {
    for (std::size_t j = 0; j < n; ++j) {
      low_[j] = x[j] - s_.asy_init * range;
      upp_[j] = x[j] + s_.asy_init * range;
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const double z = (x[j] - xold1_[j]) * (xold1_[j] - xold2_[j]);
      const double gamma = z > 0.0 ? s_.asy_incr : (z < 0.0 ? s_.asy_decr : 1.0);
      low_[j] = x[j] - gamma * (xold1_[j] - low_[j]);
      upp_[j] = x[j] + gamma * (upp_[j] - xold1_[j]);
      low_[j] = std::clamp(low_[j], x[j] - s_.asy_max * range, x[j] - s_.asy_min * range);
      upp_[j] = std::clamp(upp_[j], x[j] + s_.asy_min * range, x[j] + s_.asy_max * range);
    }
  }

  std::vector<double> xnew(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double lo = std::max({xmin_, low_[j] + s_.albefa * (x[j] - low_[j]), x[j] - s_.move * range});
    const double hi = std::min({xmax_, upp_[j] - s_.albefa * (upp_[j] - x[j]), x[j] + s_.move * range});
    const double dpos = std::max(grad[j], 0.0);
    const double dneg = std::max(-grad[j], 0.0);
    const double ux = upp_[j] - x[j];
    const double xl = x[j] - low_[j];
    const double p = ux * ux * (1.001 * dpos + 0.001 * dneg + s_.raa0 / range);
    const double q = xl * xl * (0.001 * dpos + 1.001 * dneg + s_.raa0 / range);
    const double sp = std::sqrt(p), sq = std::sqrt(q);
    const double xstar = (sp * low_[j] + sq * upp_[j]) / (sp + sq);
    xnew[j] = std::clamp(xstar, lo, hi);
  }
  xold2_ = xold1_;
  xold1_.assign(x.begin(), x.end());
  return xnew;
}

}  // namespace mtopo
