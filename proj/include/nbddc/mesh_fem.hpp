#pragma once

// Uniform quadrilateral grids and the lowest-order Raviart-Thomas / P0
// mixed discretization of the Darcy problem with zero boundary flux.
//
// Flux dofs live on interior edges only and carry the normal component of
// the velocity: +x for vertical edges, +y for horizontal edges. Pressure
// dofs are one per cell. Every level of the substructure hierarchy reuses
// these types: a coarse level is a grid whose "cells" are the substructures
// of the level below.

#include "nbddc/saddle_core.hpp"

#include <array>
#include <span>
#include <variant>
#include <vector>

namespace nbddc {

/// Local face order of a cell.
enum Side : int { West = 0, East = 1, South = 2, North = 3 };

struct QuadMesh {
  int nx = 0;
  int ny = 0;
  double hx = 0.0;   // cell width
  double hy = 0.0;   // cell height

  int num_cells() const { return nx * ny; }
  int num_vertical_edges() const { return (nx - 1) * ny; }
  int num_horizontal_edges() const { return nx * (ny - 1); }
  int num_flux() const { return num_vertical_edges() + num_horizontal_edges(); }
  int num_pressure() const { return num_cells(); }
  double cell_area() const { return hx * hy; }

  int cell(int i, int j) const { return j * nx + i; }
  std::array<int, 2> cell_position(int c) const { return {c % nx, c / nx}; }

  /// Edge between cells (i, j) and (i + 1, j).
  int vertical_edge(int i, int j) const { return j * (nx - 1) + i; }
  /// Edge between cells (i, j) and (i, j + 1).
  int horizontal_edge(int i, int j) const { return num_vertical_edges() + j * nx + i; }
  bool is_vertical(int edge) const { return edge < num_vertical_edges(); }

  /// Flux dofs of a cell in West/East/South/North order; -1 on the boundary.
  std::array<int, 4> cell_faces(int c) const;
  /// Cells on the negative and positive side of an interior edge.
  std::array<int, 2> edge_cells(int edge) const;
  /// Edges on the domain boundary; they carry no dof.
  int boundary_edge_count() const { return 2 * (nx + ny); }
};

/// Unit square split into nx by ny cells.
QuadMesh build_mesh(int nx, int ny);
/// Grid with explicit cell size; used for coarse levels.
QuadMesh build_grid(int nx, int ny, double hx, double hy);

/// Scalar permeability, constant on each cell.
struct CoefficientField {
  int nx = 0;
  int ny = 0;
  std::vector<double> values;

  static CoefficientField constant(const QuadMesh& mesh, double k);
  static CoefficientField from_values(const QuadMesh& mesh, std::vector<double> values);

  double operator[](int cell) const { return values[static_cast<std::size_t>(cell)]; }
  CoefficientField scaled(double factor) const;
};

/// Coefficient jumps aligned with substructure boundaries of a nested
/// decomposition with the given per-level ratios (finest first).
enum class JumpLayout {
  /// Variations interior to the top-level substructures: in each of them
  /// the central next-level substructure holds k1 and, inside that, the
  /// central substructure one level further down holds k3; the rest is k2.
  Interior,
  /// Constant on each top-level substructure, cycling k1, k2, k3 so that
  /// neighbours always differ.
  TopAligned,
};

CoefficientField aligned_jump(const QuadMesh& mesh, std::span<const int> ratios, double k1,
                              double k2, double k3, JumpLayout layout);

/// Assembled saddle-point system on one grid. Element data is kept so that
/// substructure-local blocks can be assembled without slicing A.
struct Rt0System {
  QuadMesh grid;
  std::vector<Eigen::Matrix4d> element_mass;        // a(phi_s, phi_t), boundary slots zero
  std::vector<Eigen::Vector4d> element_divergence;  // b(phi_s, 1_cell)
  SparseMatrix A;    // flux mass, num_flux x num_flux
  SparseMatrix B;    // divergence, num_pressure x num_flux
  Vector g;          // pressure right-hand side, -int f q
  Vector areas;      // per cell

  Index num_flux() const { return A.rows(); }
  Index num_pressure() const { return B.rows(); }
  Index num_dofs() const { return num_flux() + num_pressure(); }

  /// sqrt(u^T A u)
  double energy_norm(const Vector& u) const;
};

/// Element matrices of a single cell (West/East/South/North, global +x/+y
/// orientation, unit normal component per basis function).
Eigen::Matrix4d rt0_element_mass(double hx, double hy, double k);
Eigen::Vector4d rt0_element_divergence(double hx, double hy);

Rt0System assemble_rt0(const QuadMesh& mesh, const CoefficientField& coeff);
/// Assembles A and B from per-element data on any grid.
Rt0System assemble_from_elements(const QuadMesh& grid, std::vector<Eigen::Matrix4d> mass,
                                 std::vector<Eigen::Vector4d> divergence);

/// Unit source in cell (0, 0) and unit sink in the opposite corner cell.
struct CornerSourceSink {};
/// Explicit per-cell source density f.
struct CellSource {
  std::vector<double> f;
};
using SourceSpec = std::variant<CornerSourceSink, CellSource>;

/// g_c = -f_c * area_c; the corner preset gives -1 and +1 in the two
/// corner cells.
Vector assemble_rhs(const QuadMesh& mesh, const SourceSpec& source);

inline constexpr double kCompatibilityTolerance = 1e-12;

/// |sum g| <= tol * ||g||.
bool check_compatibility(const Vector& g, double tol = kCompatibilityTolerance);

/// Removes the area-weighted mean: y - w (w.y) / (w.w).
Vector project_zero_mean(const Vector& y, const Vector& weights);

/// || B u || over mean-zero pressures, divided by ||u||_A (0 for u = 0).
double divergence_defect(const Rt0System& system, const Vector& u, const Vector& weights);
double divergence_defect(const Rt0System& system, const Vector& u);

}  // namespace nbddc
