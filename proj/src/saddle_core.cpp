#include "nbddc/saddle_core.hpp"

#include <Eigen/SparseCholesky>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

namespace nbddc {

static_assert(sizeof(lapack_int) == sizeof(int), "LP64 LAPACK expected");

namespace {

double max_abs_entry(const SparseMatrix& m) {
  double v = 0.0;
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
  return v;
}

void check_symmetric(const SparseMatrix& full, double tol) {
  if (full.rows() != full.cols()) throw DimensionError("symmetric matrix must be square");
  const SparseMatrix diff = SparseMatrix(full.transpose()) - full;
  const double scale = std::max(max_abs_entry(full), 1.0e-300);
  if (max_abs_entry(diff) > tol * scale) throw std::invalid_argument("matrix is not symmetric");
}

}  // namespace

// ---------------------------------------------------------------------------
// SparseSymMatrix

SparseSymMatrix SparseSymMatrix::from_full(const SparseMatrix& full, double tol) {
  check_symmetric(full, tol);
  SparseSymMatrix m;
  m.lower_ = full.triangularView<Eigen::Lower>();
  m.lower_.makeCompressed();
  return m;
}

SparseSymMatrix SparseSymMatrix::from_dense(const Matrix& full, double tol) {
  return from_full(full.sparseView(), tol);
}

SparseSymMatrix SparseSymMatrix::from_triplets(Index n, std::span<const Triplet> entries) {
  std::vector<Triplet> lower;
  lower.reserve(entries.size());
  for (const auto& t : entries) {
    if (t.row() < 0 || t.col() < 0 || t.row() >= n || t.col() >= n)
      throw DimensionError("triplet outside matrix bounds");
    if (!std::isfinite(t.value())) throw std::invalid_argument("non-finite matrix entry");
    if (t.row() >= t.col())
      lower.push_back(t);
    else
      lower.emplace_back(t.col(), t.row(), t.value());
  }
  SparseSymMatrix m;
  m.lower_.resize(n, n);
  m.lower_.setFromTriplets(lower.begin(), lower.end());
  m.lower_.makeCompressed();
  return m;
}

SparseMatrix SparseSymMatrix::full() const {
  SparseMatrix f = lower_.selfadjointView<Eigen::Lower>();
  f.makeCompressed();
  return f;
}

Matrix SparseSymMatrix::dense() const { return Matrix(full()); }

Vector SparseSymMatrix::multiply(const Vector& x) const {
  if (x.size() != rows()) throw DimensionError("multiply: dimension mismatch");
  return lower_.selfadjointView<Eigen::Lower>() * x;
}

double SparseSymMatrix::max_abs() const { return max_abs_entry(lower_); }

// ---------------------------------------------------------------------------
// Factorization

Factorization factor_indefinite_dense(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("factor: matrix must be square");
  Factorization f;
  f.n_ = m.rows();
  Factorization::DenseFactor d;
  d.ld = m;
  d.pivots.assign(static_cast<std::size_t>(f.n_), 0);
  if (f.n_ == 0) {
    f.factor_ = std::move(d);
    return f;
  }
  const double scale = m.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw SingularMatrixError("factor: zero matrix");

  const lapack_int n = static_cast<lapack_int>(f.n_);
  const lapack_int info =
      LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n, d.ld.data(), n, d.pivots.data());
  if (info < 0) throw std::runtime_error("dsytrf: invalid argument");

  // Inertia and the smallest pivot magnitude from the block diagonal D.
  double min_pivot = std::numeric_limits<double>::infinity();
  Inertia inertia;
  auto count = [&](double ev) {
    min_pivot = std::min(min_pivot, std::abs(ev));
    if (std::abs(ev) <= kSingularPivotTolerance * scale)
      ++inertia.zero;
    else if (ev > 0)
      ++inertia.positive;
    else
      ++inertia.negative;
  };
  for (Index k = 0; k < f.n_;) {
    if (d.pivots[static_cast<std::size_t>(k)] > 0) {
      count(d.ld(k, k));
      k += 1;
    } else {
      const double a = d.ld(k, k), b = d.ld(k + 1, k), c = d.ld(k + 1, k + 1);
      const double mean = 0.5 * (a + c);
      const double rad = std::hypot(0.5 * (a - c), b);
      count(mean + rad);
      count(mean - rad);
      k += 2;
    }
  }
  if (info > 0 || inertia.zero > 0) {
    std::ostringstream msg;
    msg << "factor: numerically singular matrix (n=" << f.n_ << ", smallest pivot "
        << min_pivot << ", scale " << scale << ")";
    throw SingularMatrixError(msg.str());
  }
  f.inertia_ = inertia;
  f.factor_ = std::move(d);
  return f;
}

Factorization factor_indefinite(const SparseSymMatrix& m) {
  if (m.rows() <= kDenseFactorLimit) return factor_indefinite_dense(m.dense());

  Factorization f;
  f.n_ = m.rows();
  const SparseMatrix full = m.full();
  auto lu = std::make_shared<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>();
  lu->isSymmetric(true);
  lu->compute(full);
  if (lu->info() != Eigen::Success) throw SingularMatrixError("factor: sparse LU failed");

  // SparseLU exposes no pivot magnitudes, so probe with a solve: a
  // numerically singular factor cannot reproduce a known solution.
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector x(f.n_);
  for (Index i = 0; i < f.n_; ++i) x[i] = dist(rng);
  const Vector y = lu->solve(full * x);
  if (!y.allFinite() || (y - x).norm() > 1e-6 * x.norm())
    throw SingularMatrixError("factor: numerically singular matrix (sparse probe failed)");

  f.factor_ = Factorization::SparseFactor{std::move(lu)};
  return f;
}

Vector Factorization::solve(const Vector& rhs) const {
  if (rhs.size() != n_) throw DimensionError("solve: dimension mismatch");
  return solve(Matrix(rhs)).col(0);
}

Matrix Factorization::solve(const Matrix& rhs) const {
  if (rhs.rows() != n_) throw DimensionError("solve: dimension mismatch");
  if (n_ == 0) return Matrix(0, rhs.cols());
  if (const auto* d = std::get_if<DenseFactor>(&factor_)) {
    Matrix x = rhs;
    const lapack_int n = static_cast<lapack_int>(n_);
    const lapack_int info =
        LAPACKE_dsytrs_work(LAPACK_COL_MAJOR, 'L', n, static_cast<lapack_int>(x.cols()),
                            d->ld.data(), n, d->pivots.data(), x.data(), n);
    if (info != 0) throw std::runtime_error("dsytrs failed");
    return x;
  }
  if (const auto* s = std::get_if<SparseFactor>(&factor_)) return s->lu->solve(rhs);
  throw std::logic_error("solve: empty factorization");
}

Vector solve(const Factorization& fact, const Vector& rhs) { return fact.solve(rhs); }

// ---------------------------------------------------------------------------
// KKT systems

SparseSymMatrix KktSystem::assemble() const {
  const Index nu = num_flux(), np = num_pressure(), nc = num_constraints();
  if (flux_mass.cols() != nu) throw DimensionError("kkt: flux block must be square");
  if (divergence.cols() != nu) throw DimensionError("kkt: divergence block width");
  if (nc > 0 && constraints.cols() != nu) throw DimensionError("kkt: constraint block width");
  if (has_gauge() && gauge.size() != np) throw DimensionError("kkt: gauge length");

  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(flux_mass.nonZeros() + divergence.nonZeros() +
                                     constraints.nonZeros() + np));
  for (Index k = 0; k < flux_mass.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(flux_mass, k); it; ++it)
      if (it.row() >= it.col()) t.emplace_back(it.row(), it.col(), it.value());
  for (Index k = 0; k < divergence.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(divergence, k); it; ++it)
      t.emplace_back(nu + it.row(), it.col(), it.value());
  for (Index k = 0; k < constraints.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(constraints, k); it; ++it)
      t.emplace_back(nu + np + it.row(), it.col(), it.value());
  if (has_gauge())
    for (Index i = 0; i < np; ++i)
      if (gauge[i] != 0.0) t.emplace_back(nu + np + nc, nu + i, gauge[i]);
  return SparseSymMatrix::from_triplets(size(), t);
}

namespace {

// Multipliers l with C^T l = -B^T 1, so that (0, 1, l) spans the null space
// of the ungauged KKT matrix. Empty optional when no such l exists.
std::optional<Vector> constant_pressure_multipliers(const KktSystem& sys) {
  const Vector bt1 = sys.divergence.transpose() * Vector::Ones(sys.num_pressure());
  const double scale = std::max(max_abs_entry(sys.divergence), 1e-300);
  if (sys.num_constraints() == 0) {
    if (bt1.cwiseAbs().maxCoeff() <= 1e-12 * scale) return Vector();
    return std::nullopt;
  }
  const SparseMatrix cct = sys.constraints * SparseMatrix(sys.constraints.transpose());
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(cct);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Vector l = ldlt.solve(-(sys.constraints * bt1));
  const Vector defect = SparseMatrix(sys.constraints.transpose()) * l + bt1;
  if (!l.allFinite() || defect.cwiseAbs().maxCoeff() > 1e-12 * scale) return std::nullopt;
  return l;
}

}  // namespace

KktSolver::KktSolver(const KktSystem& system)
    : nu_(system.num_flux()),
      np_(system.num_pressure()),
      nc_(system.num_constraints()),
      gauge_(system.has_gauge()) {
  if (gauge_ && system.size() > kDenseFactorLimit && np_ > 0 && nu_ > 0 &&
      std::abs(system.gauge.sum()) > 0.0) {
    if (auto l = constant_pressure_multipliers(system)) {
      Index pin = 0;
      system.gauge.cwiseAbs().maxCoeff(&pin);
      KktSystem pinned = system;
      pinned.gauge = Vector::Zero(np_);
      pinned.gauge[pin] = 1.0;
      fact_ = factor_indefinite(pinned.assemble());
      gauge_row_ = system.gauge;
      null_multipliers_ = std::move(*l);
      pin_ = pin;
      return;
    }
  }
  fact_ = factor_indefinite(system.assemble());
}

KktSolver::KktSolver(const Matrix& a, const Matrix& b, const Matrix& c, const Vector& gauge)
    : nu_(a.rows()), np_(b.rows()), nc_(c.rows()), gauge_(gauge.size() > 0) {
  if (a.cols() != nu_ || b.cols() != nu_ || (nc_ > 0 && c.cols() != nu_))
    throw DimensionError("kkt: block dimensions");
  if (gauge_ && gauge.size() != np_) throw DimensionError("kkt: gauge length");
  const Index n = nu_ + np_ + nc_ + (gauge_ ? 1 : 0);
  Matrix k = Matrix::Zero(n, n);
  k.topLeftCorner(nu_, nu_) = a;
  k.block(nu_, 0, np_, nu_) = b;
  k.block(0, nu_, nu_, np_) = b.transpose();
  if (nc_ > 0) {
    k.block(nu_ + np_, 0, nc_, nu_) = c;
    k.block(0, nu_ + np_, nu_, nc_) = c.transpose();
  }
  if (gauge_) {
    k.block(n - 1, nu_, 1, np_) = gauge.transpose();
    k.block(nu_, n - 1, np_, 1) = gauge;
  }
  fact_ = n <= kDenseFactorLimit ? factor_indefinite_dense(k)
                                 : factor_indefinite(SparseSymMatrix::from_dense(k));
}

KktSolution KktSolver::solve(const Vector& flux_rhs, const Vector& pressure_rhs,
                             const Vector& constraint_rhs) const {
  auto check = [](const Vector& v, Index n, const char* what) {
    if (v.size() != 0 && v.size() != n)
      throw DimensionError(std::string("kkt solve: ") + what + " rhs length");
  };
  check(flux_rhs, nu_, "flux");
  check(pressure_rhs, np_, "pressure");
  check(constraint_rhs, nc_, "constraint");

  Vector rhs = Vector::Zero(fact_.size());
  if (flux_rhs.size()) rhs.head(nu_) = flux_rhs;
  if (pressure_rhs.size()) rhs.segment(nu_, np_) = pressure_rhs;
  if (constraint_rhs.size()) rhs.segment(nu_ + np_, nc_) = constraint_rhs;

  // B u sums to zero, so the gauge multiplier is fixed by the net source.
  double mult = 0.0;
  if (pin_ >= 0) {
    mult = rhs.segment(nu_, np_).sum();
    if (nc_ > 0) mult += null_multipliers_.dot(rhs.segment(nu_ + np_, nc_));
    mult /= gauge_row_.sum();
    rhs.segment(nu_, np_) -= mult * gauge_row_;
  }
  const Vector x = fact_.solve(rhs);

  KktSolution s;
  s.flux = x.head(nu_);
  s.pressure = x.segment(nu_, np_);
  s.multipliers = x.segment(nu_ + np_, nc_);
  if (pin_ >= 0) {
    const double shift = -gauge_row_.dot(s.pressure) / gauge_row_.sum();
    s.pressure.array() += shift;
    if (nc_ > 0) s.multipliers += shift * null_multipliers_;
    s.gauge_multiplier = mult;
  } else if (gauge_) {
    s.gauge_multiplier = x[x.size() - 1];
  }
  return s;
}

void require_consistent(const KktSystem& system, const KktSolution& solution,
                        const Vector& flux_rhs, const Vector& pressure_rhs) {
  if (!system.has_gauge()) return;
  const double mismatch = std::abs(solution.gauge_multiplier) * system.gauge.norm();
  const Vector bu = system.divergence * solution.flux;
  const double scale = (pressure_rhs.size() ? pressure_rhs.norm() : 0.0) + bu.norm() +
                       (flux_rhs.size() ? 1e-3 * flux_rhs.norm() : 0.0);
  if (mismatch > 1e-10 * std::max(scale, 1e-300))
    throw InconsistentSystemError(
        "pressure right-hand side is incompatible with the gauge (nonzero net source)");
}

KktSolution solve_constrained(const KktSystem& system, const Vector& flux_rhs,
                              const Vector& pressure_rhs, const Vector& constraint_rhs,
                              GaugePolicy policy) {
  const KktSolver solver(system);
  KktSolution s = solver.solve(flux_rhs, pressure_rhs, constraint_rhs);
  if (policy == GaugePolicy::RequireConsistent)
    require_consistent(system, s, flux_rhs, pressure_rhs);
  return s;
}

Vector pressure_gauge(const Vector& areas, std::span<const int> region) {
  if (region.empty()) throw std::invalid_argument("pressure_gauge: empty region");
  Vector row = Vector::Zero(areas.size());
  for (int e : region) {
    if (e < 0 || e >= areas.size()) throw DimensionError("pressure_gauge: element index");
    row[e] = areas[e];
  }
  const double top = row.cwiseAbs().maxCoeff();
  if (!(top > 0.0)) throw std::invalid_argument("pressure_gauge: region has zero area");
  return row / top;
}

Vector pressure_gauge(const Vector& areas) {
  std::vector<int> all(static_cast<std::size_t>(areas.size()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return pressure_gauge(areas, all);
}

}  // namespace nbddc
