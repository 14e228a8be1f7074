#pragma once

// Nested BDDC: restrict the sources up the hierarchy, solve the top level
// directly, then walk back down. On each level the coarse solution is
// prolonged, made locally divergence-consistent by substructure solves and
// finally corrected by PCG with the multilevel BDDC preconditioner started
// on that level.

#include "nbddc/bddc.hpp"
#include "nbddc/krylov.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nbddc {

enum class CoefficientPattern { Constant, JumpLeft, JumpRight };

struct ExperimentSpec {
  std::string name;
  int levels = 2;
  int ratio = 3;
  int coarse_cells = 0;     // top grid cells per direction; 0 means `ratio`
  CoefficientPattern pattern = CoefficientPattern::Constant;
  double k1 = 1.0;          // also the value of the constant pattern
  double k2 = 1.0;
  double k3 = 1.0;
  double gamma = 0.0;
  double tol = 1e-6;
  int max_iterations = 500;

  int mesh_cells() const;
  /// Throws std::invalid_argument with a readable reason.
  void validate() const;
};

struct ResultRow {
  int L = 0;
  int level = 0;      // 1 = finest
  int M = 0;          // levels used by the preconditioner, L - level + 1
  int nsub = 0;
  long n = 0;         // assembled flux + pressure dofs of the level
  long n_gamma = 0;   // interface flux dofs
  long n_boundary = 0;   // boundary edges of the level grid (no dofs)
  int iter = 0;
  double cond = 1.0;
  bool converged = false;
};

struct NestedResult {
  Vector flux;
  Vector pressure;              // zero area-weighted mean
  std::vector<ResultRow> rows;  // coarsest level first
  std::vector<PcgReport> reports;
  bool converged() const;
};

struct NestedOptions {
  double tol = 1e-6;
  int max_iterations = 500;
  bool monitor_divergence = false;   // record ||B u|| / ||u||_A per PCG iterate
};

CoefficientField make_coefficient(const ExperimentSpec& spec, const QuadMesh& mesh);

/// Everything needed to run a spec: fine system with the corner source
/// and sink, hierarchy and preconditioner.
struct Problem {
  ExperimentSpec spec;
  QuadMesh mesh;
  CoefficientField coeff;
  std::optional<MultilevelPreconditioner> precond;

  const Rt0System& fine() const { return precond->system(0); }
};

Problem build_problem(const ExperimentSpec& spec);
/// Same with an explicit coefficient field (must match the spec's mesh).
Problem build_problem(const ExperimentSpec& spec, const CoefficientField& coeff);

/// Source restriction to the next coarser level (sum over substructures).
Vector step1_coarse_rhs(const MultilevelPreconditioner& m, int level, const Vector& g);

/// u_I from substructure solves so that u0 + u_I matches the level sources
/// on every cell.
Vector step2_subdomain_solve(const MultilevelPreconditioner& m, int level, const Vector& u0,
                             const Vector& g);

struct Correction {
  Vector flux;
  Vector pressure;
  PcgReport report;
};

/// Divergence-free correction of u_star and the level pressure, by PCG on
/// [A B^T; B 0] with the multilevel preconditioner started on `level`.
Correction step3_correction(const MultilevelPreconditioner& m, int level, const Vector& u_star,
                            const NestedOptions& options = {});

NestedResult nested_solve(const MultilevelPreconditioner& m, const NestedOptions& options = {});
NestedResult nested_solve(const ExperimentSpec& spec);

/// Direct sparse solve of the full saddle system with zero-mean pressure.
FluxPressure oracle_direct_solve(const Rt0System& system);

/// Named experiment lists; throws std::invalid_argument for unknown names.
std::vector<ExperimentSpec> preset(const std::string& name);
std::vector<std::string> preset_names();

inline constexpr const char* kCsvHeader = "L,level,M,nsub,n,n_gamma,iter,cond";
void write_csv_row(std::ostream& os, const ResultRow& row);

struct TableRun {
  std::vector<ResultRow> rows;
  std::vector<std::string> errors;   // one entry per failed spec
  std::vector<PcgReport> reports;
};

/// Runs every spec, writing the CSV header and one row per level.
TableRun run_table(const std::vector<ExperimentSpec>& specs, std::ostream& csv);

}  // namespace nbddc
