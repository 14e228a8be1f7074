#pragma once

// Preconditioned conjugate gradients with a Lanczos condition estimate.

#include "nbddc/saddle_core.hpp"

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace nbddc {

using LinearMap = std::function<Vector(const Vector&)>;

/// p^T A p <= 0 during PCG.
class IndefiniteOperatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// r^T M r below this fraction of its expected size (relative to ||r||^2)
/// counts as a breakdown of the preconditioned inner product.
inline constexpr double kPcgBreakdown = 1e-12;
inline constexpr int kPcgMaxRestarts = 2;

struct PcgOptions {
  double tol = 1e-6;            // relative plain residual
  int max_iterations = 500;
  /// Evaluated on every iterate and recorded in the report; empty to skip.
  std::function<double(const Vector&)> monitor;
};

struct PcgReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> residuals;                  // ||r_k|| / ||b||, k = 0..iterations
  std::vector<double> preconditioned_residuals;   // sqrt(r_k^T M r_k) / sqrt(b^T M b)
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<double> monitor_values;             // one per iterate after x_0
  double condition = 1.0;
};

struct PcgResult {
  Vector x;
  PcgReport report;
};

/// Zero initial guess. Stops when ||b - A x|| <= tol ||b||. If r^T M r
/// collapses while ||r|| does not, M r is applied as a plain correction and
/// the iteration restarts; the Lanczos data then covers the first cycle only.
PcgResult pcg(const LinearMap& op, const LinearMap& precond, const Vector& rhs,
              const PcgOptions& options = {});

/// Extreme eigenvalues of the Lanczos tridiagonal matrix built from the PCG
/// step lengths alpha_j and ratios beta_j.
struct LanczosSpectrum {
  double lambda_min = 1.0;
  double lambda_max = 1.0;
  double condition() const { return lambda_max / lambda_min; }
};

LanczosSpectrum lanczos_spectrum(const std::vector<double>& alphas,
                                 const std::vector<double>& betas);
double lanczos_condition(const std::vector<double>& alphas, const std::vector<double>& betas);

/// `iteration,residual,preconditioned_residual[,monitor]` lines.
void write_history_csv(std::ostream& os, const PcgReport& report, bool header = true);

}  // namespace nbddc
