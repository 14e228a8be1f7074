#include <doctest.h>

#include "nbddc/mesh_fem.hpp"
#include "nbddc/saddle_core.hpp"

#include <random>

using namespace nbddc;

namespace {

Vector random_vector(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

// Dense gauged Darcy KKT built independently of KktSystem::assemble.
Matrix dense_darcy_kkt(const Rt0System& sys) {
  const Index nu = sys.num_flux(), np = sys.num_pressure();
  Matrix k = Matrix::Zero(nu + np + 1, nu + np + 1);
  k.topLeftCorner(nu, nu) = Matrix(sys.A);
  k.block(nu, 0, np, nu) = Matrix(sys.B);
  k.block(0, nu, nu, np) = Matrix(sys.B).transpose();
  k.block(nu + np, nu, 1, np).setConstant(1.0);
  k.block(nu, nu + np, np, 1).setConstant(1.0);
  return k;
}

}  // namespace

TEST_SUITE("saddle_core") {

TEST_CASE("identity and permutation factor exactly") {
  const Vector rhs = Vector::LinSpaced(2, 1.0, 2.0);
  const Factorization id = factor_indefinite(SparseSymMatrix::from_dense(Matrix::Identity(2, 2)));
  CHECK((solve(id, rhs) - rhs).norm() == doctest::Approx(0.0));
  CHECK(id.inertia().positive == 2);

  Matrix perm(2, 2);
  perm << 0, 1, 1, 0;
  const Factorization f = factor_indefinite(SparseSymMatrix::from_dense(perm));
  const Vector x = solve(f, rhs);
  CHECK(x[0] == doctest::Approx(2.0));
  CHECK(x[1] == doctest::Approx(1.0));
  CHECK(f.inertia().positive == 1);
  CHECK(f.inertia().negative == 1);
}

TEST_CASE("singular matrices are rejected") {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 0) = 1.0;
  CHECK_THROWS_AS(factor_indefinite(SparseSymMatrix::from_dense(m)), SingularMatrixError);
  CHECK_THROWS_AS(factor_indefinite_dense(Matrix::Zero(4, 4)), SingularMatrixError);
}

TEST_CASE("asymmetric input is rejected") {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  CHECK_THROWS(SparseSymMatrix::from_dense(m, 1e-12));
}

TEST_CASE("dimension mismatch on solve") {
  const Factorization f = factor_indefinite_dense(Matrix::Identity(3, 3));
  CHECK_THROWS_AS(f.solve(Vector(Vector::Ones(2))), DimensionError);
}

TEST_CASE("3x3 Darcy saddle with gauge matches a dense oracle") {
  const QuadMesh mesh = build_mesh(3, 3);
  Rt0System sys = assemble_rt0(mesh, CoefficientField::constant(mesh, 1.0));
  sys.g = assemble_rhs(mesh, CornerSourceSink{});
  const KktSystem kkt{sys.A, sys.B, SparseMatrix(0, sys.num_flux()), pressure_gauge(sys.areas)};

  const Matrix dense = dense_darcy_kkt(sys);
  Vector b = Vector::Zero(dense.rows());
  b.segment(sys.num_flux(), sys.num_pressure()) = sys.g;
  const Vector ref = dense.fullPivLu().solve(b);

  const KktSolution s = solve_constrained(kkt, Vector::Zero(sys.num_flux()), sys.g);
  Vector x(dense.rows());
  x << s.flux, s.pressure, s.gauge_multiplier;
  CHECK((dense * x - b).norm() <= 1e-12 * b.norm());
  CHECK((x - ref).norm() <= 1e-12 * ref.norm());
}

TEST_CASE("minimum norm under a linear constraint") {
  KktSystem kkt;
  kkt.flux_mass = SparseMatrix(Matrix::Identity(2, 2).sparseView());
  kkt.divergence = SparseMatrix(0, 2);
  Matrix c(1, 2);
  c << 1, 1;
  kkt.constraints = c.sparseView();
  const KktSolution s = solve_constrained(kkt, Vector::Zero(2), {}, Vector::Constant(1, 2.0));
  CHECK(s.flux[0] == doctest::Approx(1.0));
  CHECK(s.flux[1] == doctest::Approx(1.0));

  const KktSolution z = solve_constrained(kkt, Vector::Zero(2), {}, Vector::Zero(1));
  CHECK(z.flux.norm() == 0.0);
}

TEST_CASE("constrained solve is energy minimal") {
  std::mt19937_64 rng(7);
  const QuadMesh mesh = build_mesh(4, 4);
  const Rt0System sys = assemble_rt0(mesh, CoefficientField::constant(mesh, 2.0));
  const Index nu = sys.num_flux();
  // fix the average of the first four dofs and the divergence
  Matrix c = Matrix::Zero(1, nu);
  c.block(0, 0, 1, 4).setConstant(0.25);
  const KktSystem kkt{sys.A, sys.B, c.sparseView(), pressure_gauge(sys.areas)};
  Vector g = random_vector(sys.num_pressure(), rng);
  g.array() -= g.mean();
  const KktSolution s = solve_constrained(kkt, Vector::Zero(nu), g, Vector::Ones(1));
  const double e0 = s.flux.dot(sys.A * s.flux);

  Matrix stacked(sys.num_pressure() + 1, nu);
  stacked << Matrix(sys.B), c;
  const Matrix kernel = stacked.fullPivLu().kernel();
  REQUIRE(kernel.cols() > 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector v = kernel * random_vector(kernel.cols(), rng);
    const Vector u = s.flux + 1e-2 * v;
    CHECK(u.dot(sys.A * u) > e0);
  }
}

TEST_CASE("gauge choice changes pressure by a constant only") {
  const QuadMesh mesh = build_mesh(5, 4);
  Rt0System sys = assemble_rt0(mesh, CoefficientField::constant(mesh, 1.0));
  sys.g = assemble_rhs(mesh, CornerSourceSink{});
  Vector pin = Vector::Zero(sys.num_pressure());
  pin[3] = 1.0;
  const KktSystem a{sys.A, sys.B, SparseMatrix(0, sys.num_flux()), pressure_gauge(sys.areas)};
  const KktSystem b{sys.A, sys.B, SparseMatrix(0, sys.num_flux()), pin};
  const KktSolution sa = solve_constrained(a, Vector::Zero(sys.num_flux()), sys.g);
  const KktSolution sb = solve_constrained(b, Vector::Zero(sys.num_flux()), sys.g);
  CHECK((sa.flux - sb.flux).norm() <= 1e-12 * sa.flux.norm());
  const Vector dp = sa.pressure - sb.pressure;
  CHECK((dp.array() - dp.mean()).matrix().norm() <= 1e-11 * sa.pressure.norm());
  CHECK(std::abs(sa.pressure.mean()) <= 1e-12 * sa.pressure.norm());
}

TEST_CASE("incompatible source is reported") {
  const QuadMesh mesh = build_mesh(3, 3);
  const Rt0System sys = assemble_rt0(mesh, CoefficientField::constant(mesh, 1.0));
  const KktSystem kkt{sys.A, sys.B, SparseMatrix(0, sys.num_flux()), pressure_gauge(sys.areas)};
  Vector g = Vector::Zero(sys.num_pressure());
  g[0] = 1.0;
  CHECK_THROWS_AS(solve_constrained(kkt, Vector::Zero(sys.num_flux()), g, {},
                                    GaugePolicy::RequireConsistent),
                  InconsistentSystemError);
  const KktSolution s = solve_constrained(kkt, Vector::Zero(sys.num_flux()), g);
  CHECK(s.gauge_multiplier != doctest::Approx(0.0));
}

TEST_CASE("pressure gauge rows") {
  const Vector areas = Vector::Constant(4, 0.25);
  const Vector all = pressure_gauge(areas);
  CHECK(all.minCoeff() == 1.0);
  CHECK(all.maxCoeff() == 1.0);
  const std::vector<int> region{1, 2};
  const Vector part = pressure_gauge(areas, region);
  CHECK(part[0] == 0.0);
  CHECK(part[1] == 1.0);
  CHECK(part.sum() == 2.0);
  CHECK_THROWS_AS(pressure_gauge(areas, std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("solve of multiply round trip, dense and sparse paths") {
  std::mt19937_64 rng(11);
  for (int n : {60, 120}) {
    const QuadMesh mesh = build_mesh(n, n / 2);
    const Rt0System sys = assemble_rt0(mesh, CoefficientField::constant(mesh, 0.5));
    const KktSystem kkt{sys.A, sys.B, SparseMatrix(0, sys.num_flux()), pressure_gauge(sys.areas)};
    const SparseSymMatrix m = kkt.assemble();
    const Factorization f = factor_indefinite(m);
    CHECK_FALSE(f.is_dense());
    // backward error: the computed solution must reproduce the right-hand side
    const Vector b = m.multiply(random_vector(m.rows(), rng));
    const Vector x = f.solve(b);
    CHECK((m.multiply(x) - b).norm() <= 1e-12 * b.norm());
  }
  const QuadMesh small = build_mesh(6, 6);
  const Rt0System sys = assemble_rt0(small, CoefficientField::constant(small, 3.0));
  const KktSystem kkt{sys.A, sys.B, SparseMatrix(0, sys.num_flux()), pressure_gauge(sys.areas)};
  const Factorization f = factor_indefinite(kkt.assemble());
  CHECK(f.is_dense());
  // the gauge pairs with the constant-pressure direction: one more positive
  CHECK(f.inertia().positive == sys.num_flux() + 1);
  CHECK(f.inertia().negative == sys.num_pressure());
  const Vector x = random_vector(f.size(), rng);
  CHECK((f.solve(kkt.assemble().multiply(x)) - x).norm() <= 1e-10 * x.norm());
}

TEST_CASE("large gauged systems agree with the dense gauge row") {
  std::mt19937_64 rng(5);
  const QuadMesh mesh = build_mesh(16, 12);
  Rt0System sys = assemble_rt0(mesh, CoefficientField::constant(mesh, 1.0));
  const KktSystem kkt{sys.A, sys.B, SparseMatrix(0, sys.num_flux()), pressure_gauge(sys.areas)};
  REQUIRE(kkt.size() > kDenseFactorLimit);
  const KktSolver solver(kkt);
  const Matrix dense = kkt.assemble().dense();
  const Vector f = random_vector(sys.num_flux(), rng);
  const Vector g = random_vector(sys.num_pressure(), rng);   // not compatible
  const KktSolution s = solver.solve(f, g);
  Vector x(dense.rows());
  x << s.flux, s.pressure, s.gauge_multiplier;
  Vector b = Vector::Zero(dense.rows());
  b << f, g, 0.0;
  CHECK((dense * x - b).norm() <= 1e-10 * b.norm());
}

TEST_CASE("factorization is deterministic") {
  const QuadMesh mesh = build_mesh(20, 20);
  const Rt0System sys = assemble_rt0(mesh, CoefficientField::constant(mesh, 1.0));
  const KktSystem kkt{sys.A, sys.B, SparseMatrix(0, sys.num_flux()), pressure_gauge(sys.areas)};
  const Vector b = Vector::LinSpaced(kkt.size(), -1.0, 1.0);
  const Vector x1 = factor_indefinite(kkt.assemble()).solve(b);
  const Vector x2 = factor_indefinite(kkt.assemble()).solve(b);
  CHECK((x1 - x2).norm() == 0.0);
}

}
