#pragma once

#include <span>
#include <vector>

namespace mtopo {

struct MmaSettings {
  double move = 0.15;
  double asy_init = 0.5;
  double asy_incr = 1.2;
  double asy_decr = 0.7;
  double raa0 = 1e-5;
  double albefa = 0.1;
  double asy_min = 0.01;  // asymptote distance bounds, fractions of the box range
  double asy_max = 10.0;
};

/// Method of moving asymptotes for a bound-constrained objective (every
/// other constraint lives in the augmented Lagrangian). The separable
/// convex subproblem has a closed-form minimizer per variable.
class Mma {
 public:
  Mma(int n, MmaSettings settings = {}, double xmin = 0.0, double xmax = 1.0);

  /// One outer MMA update. Throws NumericalError on a non-finite gradient.
  std::vector<double> step(std::span<const double> x, std::span<const double> grad);

  int iteration() const { return iter_; }
  std::span<const double> lower_asymptotes() const { return low_; }
  std::span<const double> upper_asymptotes() const { return upp_; }

 private:
  MmaSettings s_;
  double xmin_, xmax_;
  int iter_ = 0;
  std::vector<double> xold1_, xold2_, low_, upp_;
};

}  // namespace mtopo
