#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mtopo {

/// Structured periodic unit-cell grid. Quadrilateral (Q4) cells in 2D,
/// hexahedral (H8) cells in 3D. Nodes and elements are numbered
/// lexicographically with x fastest.
struct RucMesh {
  int dim = 2;
  std::array<int, 3> res{1, 1, 1};  // cells per axis, res[2] == 1 in 2D
  double side_mm = 10.0;
  double cell_size = 0.0;
  int num_elements = 0;
  int num_nodes = 0;  // before periodic elimination
  std::vector<int> connectivity;  // num_elements * nodes_per_element()
  std::vector<double> coords;     // num_nodes * dim, mm

  int nodes_per_element() const { return dim == 2 ? 4 : 8; }
  int dofs_per_element() const { return dim * nodes_per_element(); }
  int voigt_size() const { return dim == 2 ? 3 : 6; }
  double element_volume() const;
  double cell_volume() const;  // |Omega|

  std::span<const int> element_nodes(int e) const {
    return {connectivity.data() + static_cast<std::size_t>(e) * nodes_per_element(),
            static_cast<std::size_t>(nodes_per_element())};
  }
  std::array<int, 3> element_ijk(int e) const;
  int element_index(int i, int j, int k = 0) const;
  std::array<double, 3> element_centroid(int e) const;
};

/// Periodic node pairing by elimination. Every node on a max face maps to
/// the congruent min-face node; corner and edge nodes collapse onto the
/// min corner. After pairing, the DOFs of independent node 0 are anchored to
/// remove the rigid translations, and the remaining DOFs are numbered as
/// equations of the reduced system.
struct DofMap {
  int dim = 2;
  std::vector<int> master;             // node -> master node (pre-elimination id)
  std::vector<int> independent_index;  // node -> compact independent node index
  std::vector<std::pair<int, int>> slave_master;
  int num_independent_nodes = 0;
  int num_equations = 0;
  std::vector<int> element_eq;  // element-local dof -> equation, -1 when anchored
  int dofs_per_element = 0;

  int num_independent_dofs() const { return dim * num_independent_nodes; }
  std::span<const int> element_equations(int e) const {
    return {element_eq.data() + static_cast<std::size_t>(e) * dofs_per_element,
            static_cast<std::size_t>(dofs_per_element)};
  }
  /// Equation of independent dof (compact node index, component), -1 if anchored.
  int equation(int independent_node, int component) const {
    return independent_node == 0 ? -1 : (independent_node - 1) * dim + component;
  }
};

/// Unit-Young's-modulus element operators for one congruent cell.
struct ElementMatrices {
  int dim = 2;
  double cell_size = 1.0;
  double poisson = 0.3;
  double volume = 1.0;
  Eigen::MatrixXd C;     // voigt x voigt, E = 1
  Eigen::MatrixXd k0;    // dofs x dofs
  Eigen::MatrixXd B;     // voigt x dofs, at the centroid
  Eigen::MatrixXd load;  // dofs x voigt: integral of B^T C, column i is the unit-strain load
  Eigen::MatrixXd chi0;  // dofs x voigt: affine nodal displacement of unit strain i
  std::vector<Eigen::MatrixXd> gauss_B;  // full-integration points
  std::vector<double> gauss_weight;      // includes the Jacobian determinant
};

RucMesh build_mesh(int dim, std::array<int, 3> resolution, double side_mm);
RucMesh build_mesh(int dim, int resolution, double side_mm);

DofMap periodic_dof_map(const RucMesh& mesh);

ElementMatrices element_stiffness_and_B(int dim, double cell_size, double poisson_ratio);

/// Isotropic solid constitutive matrix with unit Young's modulus. Plane
/// stress in 2D, Voigt order [xx yy zz xy yz xz] in 3D, engineering shears.
Eigen::MatrixXd constitutive_matrix(int dim, double poisson_ratio);

}  // namespace mtopo
