#pragma once

// BDDC components for every level of a nested decomposition and the
// multilevel preconditioner built from them.
//
// A level k residual is a flux functional r. Applying the preconditioner
// returns a flux u that is divergence free on level k together with a
// pressure p: interior pre-correction, substructure (Delta) correction,
// coarse correction on level k + 1 (recursive, exact on the top level),
// averaging of the interface values and interior post-correction.

#include "nbddc/hierarchy.hpp"
#include "nbddc/mesh_fem.hpp"
#include "nbddc/saddle_core.hpp"

#include <vector>

namespace nbddc {

struct FluxPressure {
  Vector flux;
  Vector pressure;
};

/// Local data of one substructure. Local flux dofs follow Subdomain::dofs
/// (interior first); local pressures follow Subdomain::cells.
struct SubdomainBlock {
  int id = -1;
  int num_interior = 0;
  SparseMatrix A;                 // unassembled local flux mass
  SparseMatrix B;                 // cells x local dofs
  SparseMatrix C;                 // one face-average row per face in `face_ids`
  Vector gauge;                   // local pressure mean row
  std::vector<int> face_ids;      // faces of the substructure, side order
  std::vector<int> face_sides;
  Vector weight;                  // averaging weight per local dof
  KktSolver interior;             // interface dofs fixed to zero
  KktSolver delta;                // face averages fixed
  Matrix psi;                     // local dofs x faces; C psi = I

  int num_dofs() const { return static_cast<int>(A.rows()); }
};

/// Local blocks and factorizations; the coarse basis is left empty.
SubdomainBlock build_subdomain_block(const Rt0System& level_system,
                                     const LevelDecomposition& decomposition,
                                     const Subdomain& subdomain, const AveragingWeights& weights);

/// Energy-minimal, locally balanced functions with unit average on one face
/// and zero average on the others; one column per face.
Matrix build_coarse_basis(const SubdomainBlock& block);

/// Galerkin coarse system: element mass psi^T A_i psi and element
/// divergence 1^T B_i psi, on the grid of substructures.
Rt0System assemble_coarse_problem(const LevelDecomposition& decomposition,
                                  const std::vector<SubdomainBlock>& blocks);

struct LevelComponents {
  int level = 0;
  AveragingWeights weights;
  std::vector<SubdomainBlock> blocks;
};

/// g on the substructures: sum over each substructure's cells.
Vector restrict_pressure(const LevelDecomposition& decomposition, const Vector& g);
/// Substructure values copied onto their cells.
Vector expand_pressure(const LevelDecomposition& decomposition, const Vector& coarse);

class MultilevelPreconditioner {
 public:
  /// `fine` must be assembled on hierarchy.grids[0]; its g is restricted to
  /// every coarser level. `coeff` only drives the averaging weights.
  MultilevelPreconditioner(Hierarchy hierarchy, Rt0System fine, const CoefficientField& coeff);

  int num_levels() const { return hierarchy_.num_levels(); }
  const Hierarchy& hierarchy() const { return hierarchy_; }
  const LevelDecomposition& decomposition(int level) const { return hierarchy_.levels.at(level); }
  const Rt0System& system(int level) const { return systems_.at(level); }
  const LevelComponents& components(int level) const { return levels_.at(level); }

  /// Preconditioner started on `level` (0 = finest), recursing to the top.
  FluxPressure apply(int level, const Vector& residual) const;

  /// Direct solve of the top-level system with global zero-mean pressure.
  FluxPressure solve_top(const Vector& flux_rhs, const Vector& pressure_rhs) const;

  /// Independent substructure saddle solves with interface dofs fixed to
  /// zero. Each local pressure has zero mean; a nonzero local net source is
  /// absorbed by the gauge multiplier.
  FluxPressure interior_correction(int level, const Vector& flux_rhs,
                                   const Vector& pressure_rhs = {}) const;

  /// Local solves with zero face averages against the weighted restriction
  /// of an interface residual. Returns one local vector per substructure.
  std::vector<Vector> delta_correction(int level, const Vector& interface_residual) const;

  /// Weighted scatter of local vectors into level dofs (the averaging E).
  Vector average(int level, const std::vector<Vector>& local) const;

  /// Coarse residual <r, E psi_f> for every face f.
  Vector coarse_residual(int level, const Vector& interface_residual) const;

  /// E psi u_c: level + 1 flux to level flux.
  Vector prolongate(int level, const Vector& coarse_flux) const;

 private:
  Hierarchy hierarchy_;
  std::vector<Rt0System> systems_;        // L systems, finest first
  std::vector<LevelComponents> levels_;   // L - 1
  KktSolver top_;
};

/// Preconditioner on the level directly below the top (coarse solve exact).
FluxPressure apply_two_level(const MultilevelPreconditioner& m, const Vector& residual);
FluxPressure apply_multilevel(const MultilevelPreconditioner& m, const Vector& residual,
                              int level);

}  // namespace nbddc
