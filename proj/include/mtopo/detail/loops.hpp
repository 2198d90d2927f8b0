#pragma once

#include <omp.h>

#include <Eigen/Dense>

#include "mtopo/exec.hpp"
#include "mtopo/homogenize.hpp"

namespace mtopo::detail {

// Stack-allocated element-sized blocks (at most 24 dofs and 6 Voigt rows).
using ElemMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 24, 24>;
using ElemVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 24, 1>;
using VoigtVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 6, 1>;

/// Independent per-element work; each iteration writes only its own slots.
template <class Fn>
void for_each_element(int n, Exec exec, Fn&& fn) {
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int e = 0; e < n; ++e) fn(e);
  } else {
    for (int e = 0; e < n; ++e) fn(e);
  }
}

/// Scatter into shared nodal storage. Serial order is plain element order;
/// the parallel variant runs one color at a time so no two concurrent
/// elements touch the same node.
template <class Fn>
void for_each_element_scatter(const UnitCellModel& model, Exec exec, Fn&& fn) {
  if (exec == Exec::Serial) {
    for (int e = 0; e < model.mesh().num_elements; ++e) fn(e);
    return;
  }
  for (const auto& group : model.colors()) {
    const int n = static_cast<int>(group.size());
#pragma omp parallel for schedule(static)
    for (int t = 0; t < n; ++t) fn(group[t]);
  }
}

/// Deterministic sum of per-element contributions. Serial: element order.
/// Parallel: static chunks per thread, partials combined in thread order.
template <class Acc, class Fn>
Acc reduce_elements(int n, Exec exec, const Acc& zero, Fn&& fn) {
  if (exec == Exec::Serial) {
    Acc total = zero;
    for (int e = 0; e < n; ++e) fn(e, total);
    return total;
  }
  const int nt = omp_get_max_threads();
  std::vector<Acc> partial(nt, zero);
#pragma omp parallel num_threads(nt)
  {
    const int t = omp_get_thread_num();
    const int chunk = (n + nt - 1) / nt;
    const int lo = t * chunk;
    const int hi = std::min(n, lo + chunk);
    for (int e = lo; e < hi; ++e) fn(e, partial[t]);
  }
  Acc total = zero;
  for (auto& p : partial) total += p;
  return total;
}

}  // namespace mtopo::detail
