#pragma once

// Nested substructuring of a uniform grid. Each level groups r x r cells of
// the level grid into one substructure; the substructures then become the
// cells of the next level grid. Faces are the only interface entities.
//
// Numbering is inherited from the coarse grid: substructure ids are coarse
// cell ids and face ids are coarse flux dof ids, so the level-(l+1) system
// lives directly on the numbering produced here. All flux dofs use the
// global +x/+y orientation, which is also the canonical face normal (lower
// substructure id to higher), hence every face dof enters its face with a
// positive sign.

#include "nbddc/mesh_fem.hpp"

#include <array>
#include <string>
#include <vector>

namespace nbddc {

struct HierarchyConfig {
  int levels = 2;            // L, the top level is solved directly
  std::vector<int> ratios;   // L - 1 entries, finest first
  double gamma = 0.0;        // 0 = multiplicity scaling, 1 = rho-scaling

  static HierarchyConfig uniform(int levels, int ratio, double gamma = 0.0);
  /// Fine cells per top-level cell.
  int total_ratio() const;
};

struct Face {
  int id = -1;             // coarse flux dof
  int lo = -1, hi = -1;    // substructures on the negative / positive side
  bool vertical = true;
  std::vector<int> dofs;   // level flux dofs, ordered along the face
};

struct Subdomain {
  int id = -1;
  std::vector<int> cells;             // level cells, row-major
  /// Level flux dofs touching the substructure: interior ones first, then
  /// interface dofs grouped by side.
  std::vector<int> dofs;
  int num_interior = 0;
  std::array<int, 4> faces{-1, -1, -1, -1};   // face ids per side, -1 on the boundary
  std::vector<int> dof_side;                  // side of each interface dof (after interior)
};

struct LevelDecomposition {
  int level = 0;                  // 0 = finest grid
  int ratio = 0;
  QuadMesh grid;                  // cells of this level
  QuadMesh coarse_grid;           // one cell per substructure
  std::vector<Subdomain> subdomains;
  std::vector<Face> faces;        // indexed by face id
  std::vector<int> cell_subdomain;
  std::vector<int> dof_face;      // -1 for interior dofs

  int num_subdomains() const { return static_cast<int>(subdomains.size()); }
  int num_faces() const { return static_cast<int>(faces.size()); }
};

struct Hierarchy {
  HierarchyConfig config;
  std::vector<QuadMesh> grids;               // L grids, finest first
  std::vector<LevelDecomposition> levels;    // L - 1 decompositions

  int num_levels() const { return config.levels; }
  const QuadMesh& top_grid() const { return grids.back(); }
};

/// Throws std::invalid_argument when the mesh does not split evenly.
Hierarchy build_hierarchy(const QuadMesh& mesh, const HierarchyConfig& config);

struct DofPartition {
  std::vector<int> interior;
  std::vector<int> interface;
  int coarse_flux = 0;        // one per face
  int coarse_pressure = 0;    // one per substructure
};

DofPartition classify_dofs(const LevelDecomposition& level);

/// Sparse row (dof, coefficient) of the face average.
std::vector<std::pair<int, double>> face_average_functional(const Face& face);
double face_average(const Face& face, const Vector& u);

/// Averaging weights, constant along each face.
struct AveragingWeights {
  double gamma = 0.0;
  std::vector<std::array<double, 2>> face;   // weight of the lo and hi side

  /// Weight of a level dof seen from substructure `sub`; 1 for interior dofs.
  double weight(const LevelDecomposition& level, int dof, int sub) const;
};

/// e_i = k_i^-gamma / (k_i^-gamma + k_j^-gamma), where k_i is the fine
/// coefficient next to the face on the side of substructure i. Throws if
/// gamma != 0 and that coefficient varies along the face.
AveragingWeights compute_weights(const Hierarchy& hierarchy, int level,
                                 const CoefficientField& coeff);

/// Per-level counts as JSON text.
std::string hierarchy_summary(const Hierarchy& hierarchy);

}  // namespace nbddc
