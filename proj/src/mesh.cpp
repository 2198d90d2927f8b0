#include "mtopo/mesh.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mtopo {

namespace {

// Corner offsets in local node order.
constexpr int kQ4Corners[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
constexpr int kH8Corners[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                  {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

std::array<int, 3> corner(int dim, int a) {
  if (dim == 2) return {kQ4Corners[a][0], kQ4Corners[a][1], 0};
  return {kH8Corners[a][0], kH8Corners[a][1], kH8Corners[a][2]};
}

// Strain-displacement matrix at natural coordinates xi in [-1, 1]^dim.
Eigen::MatrixXd strain_displacement(int dim, double h, const std::array<double, 3>& xi) {
  const int nn = dim == 2 ? 4 : 8;
  const int nv = dim == 2 ? 3 : 6;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nv, dim * nn);
  for (int a = 0; a < nn; ++a) {
    const auto c = corner(dim, a);
    std::array<double, 3> s{};
    for (int d = 0; d < dim; ++d) s[d] = c[d] == 0 ? -1.0 : 1.0;
    // dN/dxi_d times dxi/dx = 2/h
    std::array<double, 3> dN{};
    for (int d = 0; d < dim; ++d) {
      double v = 0.5 * s[d];
      for (int o = 0; o < dim; ++o)
        if (o != d) v *= 0.5 * (1.0 + s[o] * xi[o]);
      dN[d] = v * 2.0 / h;
    }
    const int col = dim * a;
    if (dim == 2) {
      B(0, col) = dN[0];
      B(1, col + 1) = dN[1];
      B(2, col) = dN[1];
      B(2, col + 1) = dN[0];
    } else {
      B(0, col) = dN[0];
      B(1, col + 1) = dN[1];
      B(2, col + 2) = dN[2];
      B(3, col) = dN[1];
      B(3, col + 1) = dN[0];
      B(4, col + 1) = dN[2];
      B(4, col + 2) = dN[1];
      B(5, col) = dN[2];
      B(5, col + 2) = dN[0];
    }
  }
  return B;
}

}  // namespace

double RucMesh::element_volume() const { return std::pow(cell_size, dim); }

double RucMesh::cell_volume() const { return std::pow(side_mm, dim); }

std::array<int, 3> RucMesh::element_ijk(int e) const {
  const int i = e % res[0];
  const int j = (e / res[0]) % res[1];
  const int k = e / (res[0] * res[1]);
  return {i, j, k};
}

int RucMesh::element_index(int i, int j, int k) const {
  return i + res[0] * (j + res[1] * k);
}

std::array<double, 3> RucMesh::element_centroid(int e) const {
  const auto ijk = element_ijk(e);
  std::array<double, 3> x{};
  for (int d = 0; d < dim; ++d) x[d] = (ijk[d] + 0.5) * cell_size;
  return x;
}

RucMesh build_mesh(int dim, std::array<int, 3> resolution, double side_mm) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("mesh dimension must be 2 or 3");
  if (!(side_mm > 0.0)) throw std::invalid_argument("side length must be positive");
  if (dim == 2) resolution[2] = 1;
  for (int d = 0; d < dim; ++d) {
    if (resolution[d] < 2)
      throw std::invalid_argument("resolution must be at least 2 cells per axis, got " +
                                  std::to_string(resolution[d]));
  }
  if (dim == 3 && !(resolution[0] == resolution[1] && resolution[1] == resolution[2]))
    throw std::invalid_argument("cells must be cubic: use equal resolution on every axis");
  if (dim == 2 && resolution[0] != resolution[1])
    throw std::invalid_argument("cells must be square: use equal resolution on both axes");

  RucMesh m;
  m.dim = dim;
  m.res = resolution;
  m.side_mm = side_mm;
  m.cell_size = side_mm / resolution[0];
  m.num_elements = resolution[0] * resolution[1] * resolution[2];

  const int px = resolution[0] + 1, py = resolution[1] + 1;
  const int pz = dim == 3 ? resolution[2] + 1 : 1;
  m.num_nodes = px * py * pz;
  m.coords.resize(static_cast<std::size_t>(m.num_nodes) * dim);
  for (int k = 0; k < pz; ++k)
    for (int j = 0; j < py; ++j)
      for (int i = 0; i < px; ++i) {
        const int n = i + px * (j + py * k);
        m.coords[n * dim] = i * m.cell_size;
        m.coords[n * dim + 1] = j * m.cell_size;
        if (dim == 3) m.coords[n * dim + 2] = k * m.cell_size;
      }

  const int npe = m.nodes_per_element();
  m.connectivity.resize(static_cast<std::size_t>(m.num_elements) * npe);
  for (int e = 0; e < m.num_elements; ++e) {
    const auto ijk = m.element_ijk(e);
    for (int a = 0; a < npe; ++a) {
      const auto c = corner(dim, a);
      const int i = ijk[0] + c[0], j = ijk[1] + c[1], k = ijk[2] + c[2];
      m.connectivity[e * npe + a] = i + px * (j + py * k);
    }
  }
  return m;
}

RucMesh build_mesh(int dim, int resolution, double side_mm) {
  return build_mesh(dim, {resolution, resolution, dim == 3 ? resolution : 1}, side_mm);
}

DofMap periodic_dof_map(const RucMesh& mesh) {
  DofMap map;
  map.dim = mesh.dim;
  const int nx = mesh.res[0], ny = mesh.res[1], nz = mesh.res[2];
  const int px = nx + 1, py = ny + 1;
  const int pz = mesh.dim == 3 ? nz + 1 : 1;

  map.master.resize(mesh.num_nodes);
  map.independent_index.resize(mesh.num_nodes);
  for (int k = 0; k < pz; ++k)
    for (int j = 0; j < py; ++j)
      for (int i = 0; i < px; ++i) {
        const int n = i + px * (j + py * k);
        const int mi = i % nx, mj = j % ny, mk = mesh.dim == 3 ? k % nz : 0;
        const int m = mi + px * (mj + py * mk);
        map.master[n] = m;
        map.independent_index[n] = mi + nx * (mj + ny * mk);
        if (m != n) map.slave_master.emplace_back(n, m);
      }
  map.num_independent_nodes = nx * ny * (mesh.dim == 3 ? nz : 1);
  map.num_equations = mesh.dim * (map.num_independent_nodes - 1);

  const int npe = mesh.nodes_per_element();
  map.dofs_per_element = mesh.dofs_per_element();
  map.element_eq.resize(static_cast<std::size_t>(mesh.num_elements) * map.dofs_per_element);
  for (int e = 0; e < mesh.num_elements; ++e) {
    const auto nodes = mesh.element_nodes(e);
    for (int a = 0; a < npe; ++a) {
      const int ind = map.independent_index[nodes[a]];
      for (int c = 0; c < mesh.dim; ++c)
        map.element_eq[e * map.dofs_per_element + a * mesh.dim + c] = map.equation(ind, c);
    }
  }
  return map;
}

Eigen::MatrixXd constitutive_matrix(int dim, double nu) {
  if (dim == 2) {
    Eigen::MatrixXd C(3, 3);
    const double f = 1.0 / (1.0 - nu * nu);
    C << f, f * nu, 0, f * nu, f, 0, 0, 0, f * (1.0 - nu) / 2.0;
    return C;
  }
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(6, 6);
  const double f = 1.0 / ((1.0 + nu) * (1.0 - 2.0 * nu));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) C(i, j) = f * (i == j ? 1.0 - nu : nu);
  for (int i = 3; i < 6; ++i) C(i, i) = f * (1.0 - 2.0 * nu) / 2.0;
  return C;
}

ElementMatrices element_stiffness_and_B(int dim, double cell_size, double nu) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("element dimension must be 2 or 3");
  if (!(nu > 0.0 && nu < 0.5))
    throw std::invalid_argument("Poisson's ratio must lie in (0, 0.5)");
  if (!(cell_size > 0.0)) throw std::invalid_argument("cell size must be positive");

  ElementMatrices em;
  em.dim = dim;
  em.cell_size = cell_size;
  em.poisson = nu;
  em.volume = std::pow(cell_size, dim);
  em.C = constitutive_matrix(dim, nu);

  const int nn = dim == 2 ? 4 : 8;
  const int nd = dim * nn;
  const int nv = dim == 2 ? 3 : 6;
  em.k0 = Eigen::MatrixXd::Zero(nd, nd);
  em.load = Eigen::MatrixXd::Zero(nd, nv);

  const double g = 1.0 / std::sqrt(3.0);
  const double detJ = std::pow(cell_size / 2.0, dim);
  const int npts = dim == 2 ? 4 : 8;
  for (int q = 0; q < npts; ++q) {
    const std::array<double, 3> xi{(q & 1) ? g : -g, (q & 2) ? g : -g, (q & 4) ? g : -g};
    Eigen::MatrixXd Bq = strain_displacement(dim, cell_size, xi);
    em.k0 += Bq.transpose() * em.C * Bq * detJ;
    em.load += Bq.transpose() * em.C * detJ;
    em.gauss_B.push_back(std::move(Bq));
    em.gauss_weight.push_back(detJ);
  }
  em.k0 = 0.5 * (em.k0 + em.k0.transpose()).eval();
  em.B = strain_displacement(dim, cell_size, {0.0, 0.0, 0.0});

  // u = eps * x with tensor shear components gamma / 2.
  em.chi0 = Eigen::MatrixXd::Zero(nd, nv);
  for (int a = 0; a < nn; ++a) {
    const auto c = corner(dim, a);
    const double x = c[0] * cell_size, y = c[1] * cell_size, z = c[2] * cell_size;
    if (dim == 2) {
      em.chi0(2 * a, 0) = x;
      em.chi0(2 * a + 1, 1) = y;
      em.chi0(2 * a, 2) = 0.5 * y;
      em.chi0(2 * a + 1, 2) = 0.5 * x;
    } else {
      const int r = 3 * a;
      em.chi0(r, 0) = x;
      em.chi0(r + 1, 1) = y;
      em.chi0(r + 2, 2) = z;
      em.chi0(r, 3) = 0.5 * y;      // xy
      em.chi0(r + 1, 3) = 0.5 * x;
      em.chi0(r + 1, 4) = 0.5 * z;  // yz
      em.chi0(r + 2, 4) = 0.5 * y;
      em.chi0(r, 5) = 0.5 * z;      // xz
      em.chi0(r + 2, 5) = 0.5 * x;
    }
  }
  return em;
}

}  // namespace mtopo
