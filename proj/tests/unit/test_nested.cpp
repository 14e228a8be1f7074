#include <doctest.h>

#include "nbddc/nested.hpp"

#include <sstream>

using namespace nbddc;

namespace {

ExperimentSpec spec(int levels, int ratio) {
  ExperimentSpec s;
  s.levels = levels;
  s.ratio = ratio;
  return s;
}

double relative_energy_error(const Rt0System& sys, const Vector& u, const Vector& ref) {
  return sys.energy_norm(u - ref) / sys.energy_norm(ref);
}

}  // namespace

TEST_SUITE("nested") {

TEST_CASE("spec validation") {
  CHECK_NOTHROW(spec(2, 3).validate());
  CHECK(spec(3, 3).mesh_cells() == 27);
  ExperimentSpec s = spec(2, 3);
  s.coarse_cells = 2;
  CHECK(s.mesh_cells() == 6);
  CHECK_THROWS_AS(spec(1, 3).validate(), std::invalid_argument);
  CHECK_THROWS_AS(spec(2, 1).validate(), std::invalid_argument);
  s = spec(2, 3);
  s.gamma = 0.5;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = spec(2, 3);
  s.k2 = -1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = spec(2, 3);
  s.tol = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_THROWS_AS(spec(12, 4).validate(), std::invalid_argument);
}

TEST_CASE("oracle direct solve") {
  const QuadMesh mesh = build_mesh(3, 3);
  Rt0System sys = assemble_rt0(mesh, CoefficientField::constant(mesh, 1.0));
  sys.g = Vector::Zero(9);
  const FluxPressure zero = oracle_direct_solve(sys);
  CHECK(zero.flux.norm() == 0.0);
  CHECK(zero.pressure.norm() == 0.0);

  sys.g = assemble_rhs(mesh, CornerSourceSink{});
  const FluxPressure s = oracle_direct_solve(sys);
  CHECK((sys.A * s.flux + sys.B.transpose() * s.pressure).norm() <= 1e-12);
  CHECK((sys.B * s.flux - sys.g).norm() <= 1e-12);
  CHECK(std::abs(s.pressure.sum()) <= 1e-12);
  // by symmetry the flux leaving the source cell splits evenly
  CHECK(s.flux[mesh.vertical_edge(0, 0)] == doctest::Approx(s.flux[mesh.horizontal_edge(0, 0)]));

  sys.g[0] = 1.0;
  CHECK_THROWS_AS(oracle_direct_solve(sys), InconsistentSystemError);
}

TEST_CASE("the three steps") {
  const Problem p = build_problem(spec(2, 3));
  const MultilevelPreconditioner& m = *p.precond;
  const Rt0System& fine = m.system(0);
  const Rt0System& top = m.system(1);

  // step 1: coarse sources are substructure sums
  const Vector gc = step1_coarse_rhs(m, 0, fine.g);
  CHECK((gc - top.g).norm() == 0.0);
  CHECK(gc.sum() == doctest::Approx(0.0));

  // step 2: after the substructure solves every cell matches its source
  const Vector u0 = m.prolongate(0, m.solve_top(Vector::Zero(top.num_flux()), top.g).flux);
  const Vector ui = step2_subdomain_solve(m, 0, u0, fine.g);
  const Vector u_star = u0 + ui;
  CHECK((fine.B * u_star - fine.g).norm() <= 1e-12);
  for (int v : classify_dofs(m.decomposition(0)).interface) CHECK(ui[v] == 0.0);

  // step 3: the correction is divergence free and lands on the oracle
  NestedOptions opt;
  opt.tol = 1e-12;
  opt.monitor_divergence = true;
  const Correction c = step3_correction(m, 0, u_star, opt);
  CHECK(c.report.converged);
  CHECK((fine.B * c.flux).norm() <= 1e-11);
  for (double d : c.report.monitor_values) CHECK(d <= 1e-10);
  const FluxPressure ref = oracle_direct_solve(fine);
  CHECK(relative_energy_error(fine, u_star + c.flux, ref.flux) <= 1e-9);
  CHECK((project_zero_mean(c.pressure, fine.areas) - ref.pressure).norm() <=
        1e-9 * ref.pressure.norm());
}

TEST_CASE("nested solve agrees with the direct solve") {
  for (const auto& [L, r] : {std::pair{2, 4}, std::pair{3, 3}, std::pair{3, 2}}) {
    const Problem p = build_problem(spec(L, r));
    const NestedResult res = nested_solve(*p.precond);
    CHECK(res.converged());
    const Rt0System& fine = p.fine();
    const FluxPressure ref = oracle_direct_solve(fine);
    CHECK(relative_energy_error(fine, res.flux, ref.flux) <= 1e-5);
    CHECK((res.pressure - ref.pressure).norm() <= 1e-4 * ref.pressure.norm());
    // global conservation: every cell balances its source
    CHECK((fine.B * res.flux - fine.g).norm() <= 1e-10);
    CHECK(std::abs(fine.areas.dot(res.pressure)) <= 1e-12 * res.pressure.norm());
  }
}

TEST_CASE("result rows") {
  const NestedResult res = nested_solve(spec(3, 3));
  REQUIRE(res.rows.size() == 2);
  const ResultRow& coarse = res.rows[0];
  const ResultRow& fine = res.rows[1];
  CHECK(coarse.level == 2);
  CHECK(coarse.M == 2);
  CHECK(coarse.nsub == 9);
  CHECK(coarse.n == 144 + 81);
  CHECK(coarse.n_gamma == 36);
  CHECK(coarse.n_boundary == 36);
  CHECK(fine.level == 1);
  CHECK(fine.M == 3);
  CHECK(fine.nsub == 81);
  CHECK(fine.n == 2 * 27 * 26 + 729);
  CHECK(fine.n_gamma == 2 * 9 * 8 * 3);
  CHECK(res.reports.size() == 2);
  for (const ResultRow& r : res.rows) {
    CHECK(r.converged);
    CHECK(r.iter > 0);
    CHECK(r.cond >= 1.0);
  }
}

TEST_CASE("finest-level condition grows with the number of levels") {
  double prev = 0.0;
  for (int L = 2; L <= 4; ++L) {
    const NestedResult res = nested_solve(spec(L, 3));
    const double cond = res.rows.back().cond;
    CHECK(cond >= prev);
    prev = cond;
  }
}

TEST_CASE("scaling the coefficient scales the pressure only") {
  ExperimentSpec s = spec(3, 3);
  s.pattern = CoefficientPattern::JumpRight;
  s.k1 = 100.0;
  s.k2 = 1.0;
  s.k3 = 0.01;
  s.gamma = 1.0;
  const Problem a = build_problem(s);
  const Problem b = build_problem(s, a.coeff.scaled(7.0));
  const NestedResult ra = nested_solve(*a.precond);
  const NestedResult rb = nested_solve(*b.precond);
  CHECK((ra.flux - rb.flux).norm() <= 1e-9 * ra.flux.norm());
  CHECK((ra.pressure / 7.0 - rb.pressure).norm() <= 1e-9 * rb.pressure.norm());
  for (std::size_t i = 0; i < ra.rows.size(); ++i) {
    CHECK(ra.rows[i].iter == rb.rows[i].iter);
    CHECK(ra.rows[i].cond == doctest::Approx(rb.rows[i].cond).epsilon(1e-6));
  }
}

TEST_CASE("presets") {
  CHECK(preset("table1-ratio3").size() == 4);
  CHECK(preset("table1-ratio4").size() == 3);
  CHECK(preset("fig3-left").front().pattern == CoefficientPattern::JumpLeft);
  CHECK(preset("fig3-right").front().gamma == 1.0);
  for (const std::string& name : preset_names())
    for (const ExperimentSpec& s : preset(name)) CHECK_NOTHROW(s.validate());
  CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
}

TEST_CASE("CSV output") {
  std::ostringstream empty;
  const TableRun none = run_table({}, empty);
  CHECK(empty.str() == std::string(kCsvHeader) + "\n");
  CHECK(none.rows.empty());

  ResultRow r;
  r.L = 3;
  r.level = 1;
  r.M = 3;
  r.nsub = 81;
  r.n = 2133;
  r.n_gamma = 432;
  r.iter = 8;
  r.cond = 2.0749;
  std::ostringstream row;
  write_csv_row(row, r);
  CHECK(row.str() == "3,1,3,81,2133,432,8,2.07\n");

  std::ostringstream csv;
  ExperimentSpec bad = spec(2, 3);
  bad.name = "broken";
  bad.k1 = 0.0;
  const TableRun run = run_table({spec(2, 3), bad}, csv);
  CHECK(run.rows.size() == 1);
  REQUIRE(run.errors.size() == 1);
  CHECK(run.errors[0].rfind("broken:", 0) == 0);
}

}
