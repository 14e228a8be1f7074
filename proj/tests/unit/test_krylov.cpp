#include <doctest.h>

#include "nbddc/bddc.hpp"
#include "nbddc/krylov.hpp"

#include <Eigen/Eigenvalues>

#include <random>
#include <sstream>

using namespace nbddc;

namespace {

LinearMap dense_map(const Matrix& m) {
  return [m](const Vector& x) { return Vector(m * x); };
}

const LinearMap identity = [](const Vector& x) { return x; };

Matrix random_spd(Index n, double spread, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Matrix q = Matrix::NullaryExpr(n, n, [&] { return d(rng); });
  q = Eigen::HouseholderQR<Matrix>(q).householderQ();
  Vector ev(n);
  for (Index i = 0; i < n; ++i) ev[i] = std::pow(spread, double(i) / double(n - 1));
  return q * ev.asDiagonal() * q.transpose();
}

}  // namespace

TEST_SUITE("krylov") {

TEST_CASE("exact preconditioner converges in one step") {
  std::mt19937_64 rng(1);
  const Matrix a = random_spd(20, 1e3, rng);
  const Matrix inv = a.inverse();
  const Vector b = Vector::LinSpaced(20, -1.0, 2.0);
  const PcgResult r = pcg(dense_map(a), dense_map(inv), b);
  CHECK(r.report.converged);
  CHECK(r.report.iterations == 1);
  CHECK(r.report.condition == doctest::Approx(1.0));
  CHECK((a * r.x - b).norm() <= 1e-10 * b.norm());
}

TEST_CASE("two by two diagonal") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 10.0;
  PcgOptions opt;
  opt.tol = 1e-14;
  const PcgResult r = pcg(dense_map(a), identity, Vector::Ones(2), opt);
  CHECK(r.report.iterations == 2);
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.x[1] == doctest::Approx(0.1));
  const LanczosSpectrum s = lanczos_spectrum(r.report.alphas, r.report.betas);
  CHECK(s.lambda_min == doctest::Approx(1.0));
  CHECK(s.lambda_max == doctest::Approx(10.0));
  CHECK(r.report.condition == doctest::Approx(10.0));
}

TEST_CASE("Lanczos estimate matches the spectrum") {
  std::mt19937_64 rng(17);
  const Matrix a = random_spd(30, 50.0, rng);
  PcgOptions opt;
  opt.tol = 1e-13;
  const PcgResult r = pcg(dense_map(a), identity, Vector::Ones(30), opt);
  CHECK(r.report.converged);
  CHECK(r.report.condition == doctest::Approx(50.0).epsilon(1e-6));
}

TEST_CASE("error decreases monotonically in the energy norm") {
  std::mt19937_64 rng(23);
  const Matrix a = random_spd(40, 1e4, rng);
  const Vector b = Vector::Ones(40);
  const Vector x = a.ldlt().solve(b);
  Matrix jac = Matrix::Zero(40, 40);
  jac.diagonal() = a.diagonal().cwiseInverse();
  PcgOptions opt;
  opt.tol = 1e-10;
  opt.monitor = [&](const Vector& xk) { return std::sqrt((x - xk).dot(a * (x - xk))); };
  const PcgResult r = pcg(dense_map(a), dense_map(jac), b, opt);
  REQUIRE(r.report.monitor_values.size() == static_cast<std::size_t>(r.report.iterations));
  for (std::size_t k = 1; k < r.report.monitor_values.size(); ++k)
    CHECK(r.report.monitor_values[k] <= r.report.monitor_values[k - 1] * (1.0 + 1e-12));
}

TEST_CASE("indefinite operators are reported") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -1.0;
  CHECK_THROWS_AS(pcg(dense_map(a), identity, Vector::Ones(2)), IndefiniteOperatorError);
  CHECK_THROWS_AS(pcg(identity, dense_map(-Matrix::Identity(2, 2)), Vector::Ones(2)),
                  IndefiniteOperatorError);
}

TEST_CASE("zero right-hand side and option checks") {
  const PcgResult r = pcg(identity, identity, Vector::Zero(5));
  CHECK(r.report.converged);
  CHECK(r.report.iterations == 0);
  CHECK(r.x.norm() == 0.0);
  PcgOptions bad;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(pcg(identity, identity, Vector::Ones(2), bad), std::invalid_argument);
}

TEST_CASE("non-convergence is flagged") {
  std::mt19937_64 rng(5);
  const Matrix a = random_spd(50, 1e6, rng);
  PcgOptions opt;
  opt.max_iterations = 3;
  const PcgResult r = pcg(dense_map(a), identity, Vector::Ones(50), opt);
  CHECK_FALSE(r.report.converged);
  CHECK(r.report.iterations == 3);
}

TEST_CASE("BDDC condition estimate against a dense eigensolve") {
  std::mt19937_64 rng(31);
  const QuadMesh mesh = build_mesh(9, 9);
  const CoefficientField k = aligned_jump(mesh, std::vector<int>{3}, 10.0, 1.0, 0.1,
                                          JumpLayout::TopAligned);
  const MultilevelPreconditioner m(build_hierarchy(mesh, HierarchyConfig::uniform(2, 3, 1.0)),
                                   assemble_rt0(mesh, k), k);
  const Rt0System& sys = m.system(0);
  const Index nu = sys.num_flux(), np = sys.num_pressure();

  // M A on the divergence-free subspace, in an orthonormal basis of ker B
  const Matrix z = Matrix(sys.B).fullPivLu().kernel();
  const Eigen::HouseholderQR<Matrix> qr(z);
  const Matrix q = qr.householderQ() * Matrix::Identity(nu, z.cols());
  Matrix mq(nu, q.cols());
  for (Index j = 0; j < q.cols(); ++j) mq.col(j) = m.apply(0, Matrix(sys.A) * q.col(j)).flux;
  const Matrix t = q.transpose() * mq;
  const Eigen::EigenSolver<Matrix> es(t, false);
  const Vector ev = es.eigenvalues().real();
  CHECK(es.eigenvalues().imag().cwiseAbs().maxCoeff() <= 1e-8 * ev.maxCoeff());
  CHECK(ev.minCoeff() >= 1.0 - 1e-8);
  const double kappa = ev.maxCoeff() / ev.minCoeff();

  const LinearMap op = [&](const Vector& x) {
    Vector y(nu + np);
    y.head(nu) = sys.A * x.head(nu) + sys.B.transpose() * x.tail(np);
    y.tail(np) = sys.B * x.head(nu);
    return y;
  };
  const LinearMap pre = [&](const Vector& r) {
    const FluxPressure s = m.apply(0, r.head(nu));
    Vector y(nu + np);
    y << s.flux, s.pressure;
    return y;
  };
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vector rhs = Vector::Zero(nu + np);
  for (Index i = 0; i < nu; ++i) rhs[i] = d(rng);
  PcgOptions opt;
  opt.tol = 1e-12;
  const PcgResult r = pcg(op, pre, rhs, opt);
  CHECK(r.report.converged);
  CHECK(r.report.condition == doctest::Approx(kappa).epsilon(0.05));
  CHECK(r.report.condition <= kappa * (1.0 + 1e-8));
}

TEST_CASE("history CSV") {
  Matrix a = Matrix::Identity(3, 3);
  a(2, 2) = 4.0;
  PcgOptions opt;
  opt.monitor = [](const Vector& x) { return x.norm(); };
  const PcgResult r = pcg(dense_map(a), identity, Vector::Ones(3), opt);
  std::ostringstream os;
  write_history_csv(os, r.report);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "iteration,residual,preconditioned_residual,monitor");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == r.report.iterations + 1);
}

}
