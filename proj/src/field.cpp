#include "mtopo/field.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mtopo/detail/loops.hpp"

namespace mtopo {

FilterOperator::FilterOperator(RowSparse kernel, double radius, double exponent, bool periodic,
                               FilterKind kind)
    : L_(std::move(kernel)), radius_(radius), exponent_(exponent), periodic_(periodic), kind_(kind) {
  L_.makeCompressed();
  Lt_ = RowSparse(L_.transpose());
  Lt_.makeCompressed();
}

namespace {

double row_dot(const FilterOperator::RowSparse& M, int r, const double* x) {
  double s = 0.0;
  for (FilterOperator::RowSparse::InnerIterator it(M, r); it; ++it) s += it.value() * x[it.col()];
  return s;
}

double row_sum(const FilterOperator::RowSparse& M, int r) {
  double s = 0.0;
  for (FilterOperator::RowSparse::InnerIterator it(M, r); it; ++it) s += it.value();
  return s;
}

}  // namespace

std::vector<double> FilterOperator::apply(std::span<const double> rho, Exec exec) const {
  const int n = size();
  if (static_cast<int>(rho.size()) != n) throw std::invalid_argument("filter input has wrong length");
  std::vector<double> out(n);
  if (kind_ == FilterKind::Linear) {
    detail::for_each_element(n, exec, [&](int i) { out[i] = row_dot(L_, i, rho.data()) / row_sum(L_, i); });
    return out;
  }
  detail::for_each_element(n, exec, [&](int i) {
    double num = 0.0, den = 0.0;
    for (RowSparse::InnerIterator it(L_, i); it; ++it) {
      const double r = rho[it.col()];
      num += it.value() * r * r;
      den += it.value() * r;
    }
    out[i] = num / (den + kDenominatorGuard);
  });
  return out;
}

std::vector<double> FilterOperator::backprop(std::span<const double> grad_tilde,
                                             std::span<const double> rho, Exec exec) const {
  const int n = size();
  std::vector<double> out(n);
  if (kind_ == FilterKind::Linear) {
    std::vector<double> scaled(n);
    for (int i = 0; i < n; ++i) scaled[i] = grad_tilde[i] / row_sum(L_, i);
    detail::for_each_element(n, exec, [&](int j) { out[j] = row_dot(Lt_, j, scaled.data()); });
    return out;
  }
  // d rho_tilde_I / d rho_J = L_IJ (2 rho_J - rho_tilde_I) / D_I
  std::vector<double> a(n), b(n);
  detail::for_each_element(n, exec, [&](int i) {
    double num = 0.0, den = 0.0;
    for (RowSparse::InnerIterator it(L_, i); it; ++it) {
      const double r = rho[it.col()];
      num += it.value() * r * r;
      den += it.value() * r;
    }
    den += kDenominatorGuard;
    a[i] = grad_tilde[i] / den;
    b[i] = grad_tilde[i] * (num / den) / den;
  });
  detail::for_each_element(n, exec, [&](int j) {
    out[j] = 2.0 * rho[j] * row_dot(Lt_, j, a.data()) - row_dot(Lt_, j, b.data());
  });
  return out;
}

FilterOperator::RowSparse FilterOperator::weights(std::span<const double> rho) const {
  RowSparse F = L_;
  for (int i = 0; i < F.outerSize(); ++i) {
    double den = 0.0;
    for (RowSparse::InnerIterator it(F, i); it; ++it)
      den += kind_ == FilterKind::Linear ? it.value() : it.value() * rho[it.col()];
    if (kind_ == FilterKind::DensityWeighted) den += kDenominatorGuard;
    for (RowSparse::InnerIterator it(F, i); it; ++it)
      it.valueRef() = (kind_ == FilterKind::Linear ? it.value() : it.value() * rho[it.col()]) / den;
  }
  return F;
}

FilterOperator build_filter(const RucMesh& mesh, double radius, double exponent, bool periodic,
                            FilterKind kind) {
  if (!(radius > 0.0)) throw std::invalid_argument("filter radius must be positive");
  if (!(exponent >= 1.0)) throw std::invalid_argument("filter exponent must be >= 1");
  const int n = mesh.num_elements;
  const double h = mesh.cell_size;
  const int reach = static_cast<int>(std::ceil(radius / h));

  std::vector<Eigen::Triplet<double>> trips;
  for (int e = 0; e < n; ++e) {
    const auto ijk = mesh.element_ijk(e);
    std::map<int, double> row;  // neighbor -> smallest image distance
    const int kr = mesh.dim == 3 ? reach : 0;
    for (int dk = -kr; dk <= kr; ++dk)
      for (int dj = -reach; dj <= reach; ++dj)
        for (int di = -reach; di <= reach; ++di) {
          std::array<int, 3> q{ijk[0] + di, ijk[1] + dj, ijk[2] + dk};
          bool inside = true;
          for (int d = 0; d < mesh.dim; ++d) {
            if (q[d] < 0 || q[d] >= mesh.res[d]) {
              if (!periodic) inside = false;
              q[d] = ((q[d] % mesh.res[d]) + mesh.res[d]) % mesh.res[d];
            }
          }
          if (!inside) continue;
          const double dist = h * std::sqrt(double(di * di + dj * dj + dk * dk));
          if (dist >= radius) continue;
          const int f = mesh.element_index(q[0], q[1], q[2]);
          auto [it, fresh] = row.emplace(f, dist);
          if (!fresh && dist < it->second) it->second = dist;
        }
    for (const auto& [f, dist] : row)
      trips.emplace_back(e, f, std::pow(1.0 - dist / radius, exponent));
  }
  FilterOperator::RowSparse L(n, n);
  L.setFromTriplets(trips.begin(), trips.end());
  FilterOperator op(std::move(L), radius, exponent, periodic, kind);
  if (radius <= h)
    op.set_warning("filter radius does not exceed one cell; filtering reduces to the identity");
  return op;
}

double Projection::value(double x) const {
  if (beta < 1e-8) return x;
  const double den = std::tanh(beta * eta) + std::tanh(beta * (1.0 - eta));
  return (std::tanh(beta * eta) + std::tanh(beta * (x - eta))) / den;
}

double Projection::slope(double x) const {
  if (beta < 1e-8) return 1.0;
  const double den = std::tanh(beta * eta) + std::tanh(beta * (1.0 - eta));
  const double t = std::tanh(beta * (x - eta));
  return beta * (1.0 - t * t) / den;
}

std::vector<double> project(std::span<const double> rho_tilde, double beta, double eta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("projection slope beta must be >= 0");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("projection threshold must lie in (0, 1)");
  const Projection p{beta, eta};
  std::vector<double> out(rho_tilde.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(p.value(rho_tilde[i]), 0.0, 1.0);
  return out;
}

DesignField DesignField::evaluate(const FilterOperator& filter, std::span<const double> rho,
                                  double beta, double eta, Exec exec) {
  DesignField f;
  f.rho.assign(rho.begin(), rho.end());
  f.rho_tilde = filter.apply(rho, exec);
  f.rho_bar = project(f.rho_tilde, beta, eta);
  f.beta = beta;
  f.eta = eta;
  return f;
}

std::vector<double> backprop_chain(std::span<const double> dJ_drho_bar, const DesignField& field,
                                   const FilterOperator& filter, Exec exec) {
  const Projection p{field.beta, field.eta};
  std::vector<double> g(dJ_drho_bar.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = dJ_drho_bar[i] * p.slope(field.rho_tilde[i]);
  return filter.backprop(g, field.rho, exec);
}

}  // namespace mtopo
