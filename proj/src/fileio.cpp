#include "mtopo/fileio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace mtopo {

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_density(const std::string& path, const RucMesh& mesh, std::span<const double> values) {
  if (static_cast<int>(values.size()) != mesh.num_elements)
    throw std::invalid_argument("density length does not match the mesh");
  auto out = open_out(path);
  out << "# mtopo density, element order x fastest\n";
  out << "# dim " << mesh.dim << " resolution " << mesh.res[0] << ' ' << mesh.res[1] << ' ' << mesh.res[2]
      << '\n';
  for (double v : values) out << g17(v) << '\n';
}

DensityFile read_density(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputShapeError("cannot open density file " + path);
  DensityFile f;
  bool have_shape = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string word;
      hs >> word;
      if (word == "dim") {
        std::string tag;
        if (!(hs >> f.dim >> tag >> f.res[0] >> f.res[1] >> f.res[2]) || tag != "resolution")
          throw InputShapeError(path + ":" + std::to_string(lineno) + ": malformed shape header");
        have_shape = true;
      }
      continue;
    }
    try {
      std::size_t used = 0;
      f.values.push_back(std::stod(line, &used));
    } catch (const std::exception&) {
      throw InputShapeError(path + ":" + std::to_string(lineno) + ": not a number");
    }
  }
  if (!have_shape) throw InputShapeError(path + ": missing '# dim .. resolution ..' header");
  const long expected = static_cast<long>(f.res[0]) * f.res[1] * f.res[2];
  if (static_cast<long>(f.values.size()) != expected)
    throw InputShapeError(path + ": header announces " + std::to_string(expected) + " cells, file has " +
                          std::to_string(f.values.size()));
  return f;
}

std::vector<double> load_density(const std::string& path, const RucMesh& mesh) {
  DensityFile f = read_density(path);
  if (f.dim != mesh.dim || f.res != mesh.res) {
    std::ostringstream msg;
    msg << path << ": grid " << f.res[0] << 'x' << f.res[1] << 'x' << f.res[2] << " (dim " << f.dim
        << ") does not match the configured " << mesh.res[0] << 'x' << mesh.res[1] << 'x' << mesh.res[2]
        << " (dim " << mesh.dim << ")";
    throw InputShapeError(msg.str());
  }
  for (double v : f.values)
    if (!(v >= 0.0 && v <= 1.0)) throw InputShapeError(path + ": density outside [0, 1]");
  return std::move(f.values);
}

void write_vtk(const std::string& path, const RucMesh& mesh,
               const std::vector<std::pair<std::string, std::span<const double>>>& fields) {
  auto out = open_out(path);
  const int nz = mesh.dim == 3 ? mesh.res[2] + 1 : 1;
  out << "# vtk DataFile Version 3.0\n";
  out << "mtopo unit cell\n";
  out << "ASCII\n";
  out << "DATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << mesh.res[0] + 1 << ' ' << mesh.res[1] + 1 << ' ' << nz << '\n';
  out << "ORIGIN 0 0 0\n";
  out << "SPACING " << g17(mesh.cell_size) << ' ' << g17(mesh.cell_size) << ' '
      << g17(mesh.dim == 3 ? mesh.cell_size : 1.0) << '\n';
  out << "CELL_DATA " << mesh.num_elements << '\n';
  for (const auto& [name, values] : fields) {
    if (static_cast<int>(values.size()) != mesh.num_elements)
      throw std::invalid_argument("VTK field '" + name + "' has wrong length");
    out << "SCALARS " << name << " double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (double v : values) out << g17(v) << '\n';
  }
}

void write_pgm(const std::string& path, const RucMesh& mesh, std::span<const double> rho_bar) {
  if (mesh.dim != 2) throw std::invalid_argument("PGM output is for 2D meshes");
  const int w = mesh.res[0], h = mesh.res[1];
  auto out = open_out(path, true);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> px(static_cast<std::size_t>(w) * h);
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      const double r = std::clamp(rho_bar[mesh.element_index(i, j)], 0.0, 1.0);
      px[static_cast<std::size_t>(h - 1 - j) * w + i] = static_cast<unsigned char>(std::lround(255.0 * r));
    }
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

void write_matrix(const std::string& path, const Eigen::MatrixXd& CH) {
  auto out = open_out(path);
  out << "# homogenized constitutive matrix C^H [MPa], Voigt order "
      << (CH.rows() == 3 ? "xx yy xy" : "xx yy zz xy yz xz") << ", engineering shear strains\n";
  for (int i = 0; i < CH.rows(); ++i) {
    for (int j = 0; j < CH.cols(); ++j) out << (j ? " " : "") << g17(CH(i, j));
    out << '\n';
  }
}

void write_history(const std::string& path, const std::vector<HistoryRow>& rows) {
  auto out = open_out(path);
  out << "iter,outer_k,objective,normalized_objective,max_g,volume_fraction,mu,beta,dmax\n";
  for (const auto& r : rows)
    out << r.iter << ',' << r.outer_k << ',' << g17(r.objective) << ',' << g17(r.normalized_objective) << ','
        << g17(r.max_g) << ',' << g17(r.volume_fraction) << ',' << g17(r.mu) << ',' << g17(r.beta) << ','
        << g17(r.dmax) << '\n';
}

void write_g_map(const std::string& path, const Problem& problem, const Evaluation& ev) {
  auto out = open_out(path);
  const int N = problem.num_elements();
  out << "# element rho_bar von_mises_mpa";
  if (problem.has_stress())
    for (const auto& l : problem.loads) out << " g_" << l.id;
  out << '\n';
  for (int e = 0; e < N; ++e) {
    out << e << ' ' << g17(ev.field.rho_bar[e]) << ' ' << g17(ev.von_mises[e]);
    if (problem.has_stress())
      for (std::size_t l = 0; l < problem.loads.size(); ++l) out << ' ' << g17(ev.g[l * N + e]);
    out << '\n';
  }
}

}  // namespace mtopo
