#include "nbddc/mesh_fem.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nbddc {

std::array<int, 4> QuadMesh::cell_faces(int c) const {
  const auto [i, j] = cell_position(c);
  return {i > 0 ? vertical_edge(i - 1, j) : -1, i < nx - 1 ? vertical_edge(i, j) : -1,
          j > 0 ? horizontal_edge(i, j - 1) : -1, j < ny - 1 ? horizontal_edge(i, j) : -1};
}

std::array<int, 2> QuadMesh::edge_cells(int edge) const {
  if (edge < 0 || edge >= num_flux()) throw DimensionError("edge index out of range");
  if (is_vertical(edge)) {
    const int i = edge % (nx - 1), j = edge / (nx - 1);
    return {cell(i, j), cell(i + 1, j)};
  }
  const int e = edge - num_vertical_edges();
  const int i = e % nx, j = e / nx;
  return {cell(i, j), cell(i, j + 1)};
}

QuadMesh build_grid(int nx, int ny, double hx, double hy) {
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("grid needs at least one cell per direction, got " +
                                std::to_string(nx) + "x" + std::to_string(ny));
  if (!(hx > 0.0) || !(hy > 0.0)) throw std::invalid_argument("cell size must be positive");
  return QuadMesh{nx, ny, hx, hy};
}

QuadMesh build_mesh(int nx, int ny) {
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("mesh needs at least one cell per direction, got " +
                                std::to_string(nx) + "x" + std::to_string(ny));
  return build_grid(nx, ny, 1.0 / nx, 1.0 / ny);
}

CoefficientField CoefficientField::constant(const QuadMesh& mesh, double k) {
  return from_values(mesh, std::vector<double>(static_cast<std::size_t>(mesh.num_cells()), k));
}

CoefficientField CoefficientField::from_values(const QuadMesh& mesh, std::vector<double> values) {
  if (static_cast<int>(values.size()) != mesh.num_cells())
    throw DimensionError("coefficient field has " + std::to_string(values.size()) +
                         " values for " + std::to_string(mesh.num_cells()) + " cells");
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("coefficient must be positive and finite");
  return CoefficientField{mesh.nx, mesh.ny, std::move(values)};
}

CoefficientField CoefficientField::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("scale factor must be positive");
  CoefficientField out = *this;
  for (double& v : out.values) v *= factor;
  return out;
}

CoefficientField aligned_jump(const QuadMesh& mesh, std::span<const int> ratios, double k1,
                              double k2, double k3, JumpLayout layout) {
  if (ratios.empty()) throw std::invalid_argument("jump layout needs at least one level");
  int top = 1;
  for (int r : ratios) {
    if (r < 2) throw std::invalid_argument("substructure ratio must be at least 2");
    top *= r;
  }
  if (mesh.nx % top != 0 || mesh.ny % top != 0)
    throw std::invalid_argument("mesh is not a multiple of the top substructure size");

  const int s2 = top / ratios.back();
  const int s3 = ratios.size() >= 2 ? s2 / ratios[ratios.size() - 2] : 0;
  const int c2 = ratios.back() / 2;
  const int c3 = ratios.size() >= 2 ? ratios[ratios.size() - 2] / 2 : 0;

  std::vector<double> values(static_cast<std::size_t>(mesh.num_cells()));
  for (int j = 0; j < mesh.ny; ++j) {
    for (int i = 0; i < mesh.nx; ++i) {
      double k = k2;
      if (layout == JumpLayout::TopAligned) {
        const int pick = (i / top + j / top) % 3;
        k = pick == 0 ? k1 : (pick == 1 ? k2 : k3);
      } else {
        const int li = i % top, lj = j % top;
        if (li / s2 == c2 && lj / s2 == c2) {
          k = k1;
          if (s3 > 0 && (li % s2) / s3 == c3 && (lj % s2) / s3 == c3) k = k3;
        }
      }
      values[static_cast<std::size_t>(mesh.cell(i, j))] = k;
    }
  }
  return CoefficientField::from_values(mesh, std::move(values));
}

double Rt0System::energy_norm(const Vector& u) const {
  return std::sqrt(std::max(0.0, u.dot(A * u)));
}

Eigen::Matrix4d rt0_element_mass(double hx, double hy, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("coefficient must be positive");
  const double s = hx * hy / k;
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m(0, 0) = m(1, 1) = m(2, 2) = m(3, 3) = s / 3.0;
  m(0, 1) = m(1, 0) = m(2, 3) = m(3, 2) = s / 6.0;
  return m;
}

Eigen::Vector4d rt0_element_divergence(double hx, double hy) {
  return Eigen::Vector4d(hy, -hy, hx, -hx);
}

Rt0System assemble_from_elements(const QuadMesh& grid, std::vector<Eigen::Matrix4d> mass,
                                 std::vector<Eigen::Vector4d> divergence) {
  const int nc = grid.num_cells();
  if (static_cast<int>(mass.size()) != nc || static_cast<int>(divergence.size()) != nc)
    throw DimensionError("element data does not match the grid");

  std::vector<Triplet> ta, tb;
  ta.reserve(static_cast<std::size_t>(nc) * 16);
  tb.reserve(static_cast<std::size_t>(nc) * 4);
  for (int c = 0; c < nc; ++c) {
    const auto faces = grid.cell_faces(c);
    for (int s = 0; s < 4; ++s) {
      if (faces[s] < 0) continue;
      tb.emplace_back(c, faces[s], divergence[c](s));
      for (int t = 0; t < 4; ++t)
        if (faces[t] >= 0) ta.emplace_back(faces[s], faces[t], mass[c](s, t));
    }
  }
  Rt0System sys;
  sys.grid = grid;
  sys.A.resize(grid.num_flux(), grid.num_flux());
  sys.A.setFromTriplets(ta.begin(), ta.end());
  sys.B.resize(nc, grid.num_flux());
  sys.B.setFromTriplets(tb.begin(), tb.end());
  sys.g = Vector::Zero(nc);
  sys.areas = Vector::Constant(nc, grid.cell_area());
  sys.element_mass = std::move(mass);
  sys.element_divergence = std::move(divergence);
  return sys;
}

Rt0System assemble_rt0(const QuadMesh& mesh, const CoefficientField& coeff) {
  if (coeff.nx != mesh.nx || coeff.ny != mesh.ny ||
      static_cast<int>(coeff.values.size()) != mesh.num_cells())
    throw DimensionError("coefficient field does not match the mesh");
  std::vector<Eigen::Matrix4d> mass(static_cast<std::size_t>(mesh.num_cells()));
  std::vector<Eigen::Vector4d> div(mass.size(), rt0_element_divergence(mesh.hx, mesh.hy));
  for (int c = 0; c < mesh.num_cells(); ++c) mass[c] = rt0_element_mass(mesh.hx, mesh.hy, coeff[c]);
  return assemble_from_elements(mesh, std::move(mass), std::move(div));
}

Vector assemble_rhs(const QuadMesh& mesh, const SourceSpec& source) {
  Vector g = Vector::Zero(mesh.num_cells());
  if (std::holds_alternative<CornerSourceSink>(source)) {
    if (mesh.num_cells() < 2) throw std::invalid_argument("corner source needs two cells");
    g(0) = -1.0;
    g(mesh.num_cells() - 1) = 1.0;
    return g;
  }
  const auto& f = std::get<CellSource>(source).f;
  if (static_cast<int>(f.size()) != mesh.num_cells())
    throw DimensionError("source has the wrong number of cells");
  for (int c = 0; c < mesh.num_cells(); ++c) g(c) = -f[c] * mesh.cell_area();
  return g;
}

bool check_compatibility(const Vector& g, double tol) {
  return std::abs(g.sum()) <= tol * std::max(g.norm(), 1e-300);
}

Vector project_zero_mean(const Vector& y, const Vector& weights) {
  if (y.size() != weights.size()) throw DimensionError("weights do not match vector");
  return y - weights * (weights.dot(y) / weights.squaredNorm());
}

double divergence_defect(const Rt0System& system, const Vector& u, const Vector& weights) {
  const double en = system.energy_norm(u);
  if (en == 0.0) return 0.0;
  return project_zero_mean(system.B * u, weights).norm() / en;
}

double divergence_defect(const Rt0System& system, const Vector& u) {
  return divergence_defect(system, u, system.areas);
}

}  // namespace nbddc
