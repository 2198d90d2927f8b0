#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mtopo/adjoint.hpp"
#include "mtopo/mesh.hpp"
#include "mtopo/optimizer.hpp"

namespace mtopo {

/// A density file that does not fit the configured mesh.
struct InputShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DensityFile {
  int dim = 2;
  std::array<int, 3> res{1, 1, 1};
  std::vector<double> values;
};

/// Flat text: two header lines, then one value per line in element order
/// (x fastest), printed with 17 significant digits so a read/write cycle is
/// lossless.
void write_density(const std::string& path, const RucMesh& mesh, std::span<const double> values);
DensityFile read_density(const std::string& path);
/// Reads and checks the grid against `mesh`; values must lie in [0, 1].
std::vector<double> load_density(const std::string& path, const RucMesh& mesh);

/// Legacy ASCII VTK, STRUCTURED_POINTS with one CELL_DATA scalar per field.
void write_vtk(const std::string& path, const RucMesh& mesh,
               const std::vector<std::pair<std::string, std::span<const double>>>& fields);

/// Binary PGM (P5), one pixel per cell, top row = max y; 2D only.
void write_pgm(const std::string& path, const RucMesh& mesh, std::span<const double> rho_bar);

void write_matrix(const std::string& path, const Eigen::MatrixXd& CH);

void write_history(const std::string& path, const std::vector<HistoryRow>& rows);

/// Per element: index, rho_bar, von Mises (MPa), then g for each load case.
void write_g_map(const std::string& path, const Problem& problem, const Evaluation& ev);

}  // namespace mtopo
