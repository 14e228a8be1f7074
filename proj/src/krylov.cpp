#include "nbddc/krylov.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <ostream>
#include <string>
#include <tuple>

namespace nbddc {

PcgResult pcg(const LinearMap& op, const LinearMap& precond, const Vector& b,
              const PcgOptions& opt) {
  if (opt.max_iterations < 1) throw std::invalid_argument("pcg: max_iterations must be positive");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("pcg: tolerance must be positive");

  PcgResult res;
  PcgReport& rep = res.report;
  res.x = Vector::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    rep.converged = true;
    rep.residuals.push_back(0.0);
    rep.preconditioned_residuals.push_back(0.0);
    return res;
  }

  Vector r = b;
  Vector z = precond(r);
  if (z.size() != b.size()) throw DimensionError("pcg: preconditioner output length");
  double rz = r.dot(z);
  const double rz0 = rz;
  const double scale0 = rz0 / (bnorm * bnorm);
  Vector p = z;
  rep.residuals.push_back(1.0);
  rep.preconditioned_residuals.push_back(1.0);

  // After a restart the recurrence no longer describes one Krylov space,
  // so the Lanczos data stops there.
  bool record = true;
  int restarts = 0;

  auto step = [&](const Vector& dir, double alpha, const Vector& adir) {
    res.x += alpha * dir;
    r -= alpha * adir;
    ++rep.iterations;
    if (opt.monitor) rep.monitor_values.push_back(opt.monitor(res.x));
    const double rel = r.norm() / bnorm;
    rep.residuals.push_back(rel);
    z = precond(r);
    const double rz_new = r.dot(z);
    rep.preconditioned_residuals.push_back(std::sqrt(std::max(rz_new, 0.0) / rz0));
    return std::pair{rel, rz_new};
  };

  while (rep.iterations < opt.max_iterations) {
    if (!(rz > 0.0))
      throw IndefiniteOperatorError("pcg: preconditioner not positive (r^T M r = " +
                                    std::to_string(rz) + ")");
    const Vector ap = op(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0))
      throw IndefiniteOperatorError("pcg: operator not positive (p^T A p = " +
                                    std::to_string(pap) + ")");
    const double alpha = rz / pap;
    if (record) rep.alphas.push_back(alpha);
    auto [rel, rz_new] = step(p, alpha, ap);
    if (rel <= opt.tol) {
      rep.converged = true;
      break;
    }

    // The residual left is invisible to r^T M r (for saddle-point problems a
    // pure pressure gradient, which M maps to a flux-free pressure update).
    // Apply M r as a correction and restart.
    if (rz_new <= kPcgBreakdown * scale0 * rel * rel * bnorm * bnorm) {
      if (restarts++ == kPcgMaxRestarts || rep.iterations >= opt.max_iterations) break;
      record = false;
      const Vector dir = z;
      std::tie(rel, rz_new) = step(dir, 1.0, op(dir));
      if (rel <= opt.tol) {
        rep.converged = true;
        break;
      }
      if (rz_new <= kPcgBreakdown * scale0 * rel * rel * bnorm * bnorm) break;
      p = z;
      rz = rz_new;
      continue;
    }

    const double beta = rz_new / rz;
    if (record) rep.betas.push_back(beta);
    p = z + beta * p;
    rz = rz_new;
  }
  rep.condition = lanczos_condition(rep.alphas, rep.betas);
  return res;
}

LanczosSpectrum lanczos_spectrum(const std::vector<double>& alphas,
                                 const std::vector<double>& betas) {
  const Index k = static_cast<Index>(alphas.size());
  if (k == 0) return {};
  if (static_cast<Index>(betas.size()) < k - 1)
    throw DimensionError("lanczos: need one beta per alpha except the last");
  Vector diag(k), off(std::max<Index>(k - 1, 0));
  for (Index j = 0; j < k; ++j) {
    diag[j] = 1.0 / alphas[j];
    if (j > 0) diag[j] += betas[j - 1] / alphas[j - 1];
    if (j + 1 < k) off[j] = std::sqrt(betas[j]) / alphas[j];
  }
  if (k == 1) return {diag[0], diag[0]};
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()[0], es.eigenvalues()[k - 1]};
}

double lanczos_condition(const std::vector<double>& alphas, const std::vector<double>& betas) {
  return lanczos_spectrum(alphas, betas).condition();
}

void write_history_csv(std::ostream& os, const PcgReport& rep, bool header) {
  const bool mon = !rep.monitor_values.empty();
  if (header) os << "iteration,residual,preconditioned_residual" << (mon ? ",monitor" : "") << '\n';
  for (std::size_t k = 0; k < rep.residuals.size(); ++k) {
    os << k << ',' << rep.residuals[k] << ',' << rep.preconditioned_residuals[k];
    if (mon) os << ',' << (k == 0 ? 0.0 : rep.monitor_values[k - 1]);
    os << '\n';
  }
}

}  // namespace nbddc
