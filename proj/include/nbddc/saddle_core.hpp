#pragma once

// Sparse symmetric storage, symmetric-indefinite factorization and
// constrained energy-minimization (KKT) solves.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace nbddc {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Raised when a factorization meets a pivot below the relative threshold.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a gauged system is asked to satisfy an incompatible
/// pressure right-hand side exactly.
class InconsistentSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pivots smaller than this fraction of the largest matrix entry are
/// treated as zero.
inline constexpr double kSingularPivotTolerance = 1e-12;

/// Matrices up to this dimension are factored densely (Bunch-Kaufman).
inline constexpr Index kDenseFactorLimit = 400;

/// Symmetric matrix keeping only its lower triangle in compressed storage.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;

  /// Builds from a full (both triangles) matrix. Throws if it is not
  /// symmetric to `tol` relative to its largest entry.
  static SparseSymMatrix from_full(const SparseMatrix& full, double tol = 0.0);
  static SparseSymMatrix from_dense(const Matrix& full, double tol = 0.0);
  /// Entries with row < col are mirrored into the lower triangle; duplicates
  /// are summed.
  static SparseSymMatrix from_triplets(Index n, std::span<const Triplet> entries);

  Index rows() const { return lower_.rows(); }
  const SparseMatrix& lower() const { return lower_; }
  SparseMatrix full() const;
  Matrix dense() const;
  Vector multiply(const Vector& x) const;
  double max_abs() const;

 private:
  SparseMatrix lower_;
};

struct Inertia {
  Index positive = 0;
  Index negative = 0;
  Index zero = 0;
};

/// Direct factorization of a symmetric (possibly indefinite) matrix.
/// Immutable once built; `solve` may be called concurrently.
class Factorization {
 public:
  Factorization() = default;

  const Inertia& inertia() const { return inertia_; }
  Index size() const { return n_; }
  bool is_dense() const { return std::holds_alternative<DenseFactor>(factor_); }

  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;

 private:
  friend Factorization factor_indefinite(const SparseSymMatrix& m);
  friend Factorization factor_indefinite_dense(const Matrix& m);

  struct DenseFactor {
    Matrix ld;                  // packed L and D from dsytrf (lower)
    std::vector<int> pivots;
  };
  struct SparseFactor {
    std::shared_ptr<const Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu;
  };

  Index n_ = 0;
  Inertia inertia_;
  std::variant<std::monostate, DenseFactor, SparseFactor> factor_;
};

/// Dense Bunch-Kaufman for small matrices, sparse LU otherwise.
Factorization factor_indefinite(const SparseSymMatrix& m);
Factorization factor_indefinite_dense(const Matrix& m);

Vector solve(const Factorization& fact, const Vector& rhs);

/// Blocks of
///
///   [ A  B^T  C^T  0 ] [u]   [f]
///   [ B  0    0    m ] [p] = [g]
///   [ C  0    0    0 ] [l]   [c]
///   [ 0  m^T  0    0 ] [s]   [0]
///
/// where the optional gauge row m fixes the mean of p and lets the
/// multiplier s absorb the constant part of B u - g.
struct KktSystem {
  SparseMatrix flux_mass;          // A, full symmetric storage
  SparseMatrix divergence;         // B, pressures x fluxes
  SparseMatrix constraints;        // C, may have zero rows
  Vector gauge;                    // m, empty when absent

  Index num_flux() const { return flux_mass.rows(); }
  Index num_pressure() const { return divergence.rows(); }
  Index num_constraints() const { return constraints.rows(); }
  bool has_gauge() const { return gauge.size() > 0; }
  Index size() const {
    return num_flux() + num_pressure() + num_constraints() + (has_gauge() ? 1 : 0);
  }

  /// The assembled symmetric KKT matrix.
  SparseSymMatrix assemble() const;
};

struct KktSolution {
  Vector flux;
  Vector pressure;
  Vector multipliers;   // constraint multipliers (C rows)
  double gauge_multiplier = 0.0;
};

/// A factored KKT system reusable across right-hand sides.
class KktSolver {
 public:
  KktSolver() = default;
  explicit KktSolver(const KktSystem& system);
  /// Dense path for small blocks; skips the sparse intermediate.
  KktSolver(const Matrix& flux_mass, const Matrix& divergence, const Matrix& constraints,
            const Vector& gauge);

  Index num_flux() const { return nu_; }
  Index num_pressure() const { return np_; }
  Index num_constraints() const { return nc_; }
  bool has_gauge() const { return gauge_; }
  const Factorization& factorization() const { return fact_; }

  /// Empty vectors are read as zero blocks.
  KktSolution solve(const Vector& flux_rhs, const Vector& pressure_rhs = {},
                    const Vector& constraint_rhs = {}) const;

 private:
  Index nu_ = 0, np_ = 0, nc_ = 0;
  bool gauge_ = false;
  Factorization fact_;
  // Large gauged systems factor a copy where the dense gauge row is
  // replaced by a single-pressure pin; the gauged solution is recovered
  // from the constant-pressure null vector (0, 1, null_multipliers_).
  Vector gauge_row_;
  Vector null_multipliers_;
  Index pin_ = -1;
};

enum class GaugePolicy {
  Absorb,            // the gauge multiplier takes up any constant mismatch
  RequireConsistent  // a nonzero gauge multiplier is an error
};

/// One-shot energy-minimal flux subject to the B and C rows.
KktSolution solve_constrained(const KktSystem& system, const Vector& flux_rhs,
                              const Vector& pressure_rhs = {},
                              const Vector& constraint_rhs = {},
                              GaugePolicy policy = GaugePolicy::Absorb);

/// Throws InconsistentSystemError when the gauge multiplier of `solution`
/// is not negligible against the right-hand side.
void require_consistent(const KktSystem& system, const KktSolution& solution,
                        const Vector& flux_rhs, const Vector& pressure_rhs);

/// Area-weighted mean-zero row over `region` (element indices), scaled so
/// its largest entry is one.
Vector pressure_gauge(const Vector& areas, std::span<const int> region);
/// Gauge over every element.
Vector pressure_gauge(const Vector& areas);

}  // namespace nbddc
