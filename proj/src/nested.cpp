#include "nbddc/nested.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace nbddc {

int ExperimentSpec::mesh_cells() const {
  long n = coarse_cells > 0 ? coarse_cells : ratio;
  for (int l = 1; l < levels; ++l) n *= ratio;
  return static_cast<int>(n);
}

void ExperimentSpec::validate() const {
  if (levels < 2) throw std::invalid_argument("levels must be at least 2");
  if (ratio < 2) throw std::invalid_argument("ratio must be at least 2");
  if (coarse_cells < 0) throw std::invalid_argument("coarse_cells must be non-negative");
  if (gamma != 0.0 && gamma != 1.0) throw std::invalid_argument("gamma must be 0 or 1");
  if (!(tol > 0.0) || tol >= 1.0) throw std::invalid_argument("tol must lie in (0, 1)");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
  for (double k : {k1, k2, k3})
    if (!(k > 0.0) || !std::isfinite(k))
      throw std::invalid_argument("coefficients must be positive and finite");
  double cells = coarse_cells > 0 ? coarse_cells : ratio;
  for (int l = 1; l < levels; ++l) cells *= ratio;
  if (cells * cells > 2.0e7) throw std::invalid_argument("mesh is too large");
  const int base = coarse_cells > 0 ? coarse_cells : ratio;
  if (base * base < 2) throw std::invalid_argument("top grid needs at least two cells");
}

CoefficientField make_coefficient(const ExperimentSpec& spec, const QuadMesh& mesh) {
  if (spec.pattern == CoefficientPattern::Constant) return CoefficientField::constant(mesh, spec.k1);
  const std::vector<int> ratios(static_cast<std::size_t>(spec.levels - 1), spec.ratio);
  const JumpLayout layout =
      spec.pattern == CoefficientPattern::JumpLeft ? JumpLayout::Interior : JumpLayout::TopAligned;
  return aligned_jump(mesh, ratios, spec.k1, spec.k2, spec.k3, layout);
}

Problem build_problem(const ExperimentSpec& spec) {
  spec.validate();
  const QuadMesh mesh = build_mesh(spec.mesh_cells(), spec.mesh_cells());
  return build_problem(spec, make_coefficient(spec, mesh));
}

Problem build_problem(const ExperimentSpec& spec, const CoefficientField& coeff) {
  spec.validate();
  Problem p;
  p.spec = spec;
  p.mesh = build_mesh(spec.mesh_cells(), spec.mesh_cells());
  p.coeff = coeff;
  Rt0System fine = assemble_rt0(p.mesh, coeff);
  fine.g = assemble_rhs(p.mesh, CornerSourceSink{});
  Hierarchy h = build_hierarchy(p.mesh, HierarchyConfig::uniform(spec.levels, spec.ratio, spec.gamma));
  p.precond.emplace(std::move(h), std::move(fine), coeff);
  return p;
}

Vector step1_coarse_rhs(const MultilevelPreconditioner& m, int level, const Vector& g) {
  return restrict_pressure(m.decomposition(level), g);
}

Vector step2_subdomain_solve(const MultilevelPreconditioner& m, int level, const Vector& u0,
                             const Vector& g) {
  const Rt0System& sys = m.system(level);
  return m.interior_correction(level, -(sys.A * u0), g - sys.B * u0).flux;
}

Correction step3_correction(const MultilevelPreconditioner& m, int level, const Vector& u_star,
                            const NestedOptions& options) {
  const Rt0System& sys = m.system(level);
  const Index nu = sys.num_flux(), np = sys.num_pressure();

  const LinearMap op = [&](const Vector& x) {
    Vector y(nu + np);
    y.head(nu) = sys.A * x.head(nu) + sys.B.transpose() * x.tail(np);
    y.tail(np) = sys.B * x.head(nu);
    return y;
  };
  const LinearMap precond = [&](const Vector& r) {
    const FluxPressure z = m.apply(level, r.head(nu));
    Vector y(nu + np);
    y << z.flux, z.pressure;
    return y;
  };

  Vector rhs = Vector::Zero(nu + np);
  rhs.head(nu) = -(sys.A * u_star);

  PcgOptions opt;
  opt.tol = options.tol;
  opt.max_iterations = options.max_iterations;
  if (options.monitor_divergence)
    opt.monitor = [&](const Vector& x) { return divergence_defect(sys, x.head(nu)); };

  PcgResult res = pcg(op, precond, rhs, opt);
  return {res.x.head(nu), res.x.tail(np), std::move(res.report)};
}

bool NestedResult::converged() const {
  for (const auto& r : rows)
    if (!r.converged) return false;
  return true;
}

NestedResult nested_solve(const MultilevelPreconditioner& m, const NestedOptions& options) {
  const int L = m.num_levels();
  const Rt0System& fine = m.system(0);
  if (!check_compatibility(fine.g))
    throw InconsistentSystemError("sources do not sum to zero; no flux can leave the domain");

  const Rt0System& top = m.system(L - 1);
  Vector u0 = m.prolongate(L - 2, m.solve_top(Vector::Zero(top.num_flux()), top.g).flux);

  NestedResult out;
  for (int lev = L - 2; lev >= 0; --lev) {
    const Rt0System& sys = m.system(lev);
    const LevelDecomposition& dec = m.decomposition(lev);
    const Vector u_star = u0 + step2_subdomain_solve(m, lev, u0, sys.g);
    Correction corr = step3_correction(m, lev, u_star, options);
    const Vector u = u_star + corr.flux;

    ResultRow row;
    row.L = L;
    row.level = lev + 1;
    row.M = L - lev;
    row.nsub = dec.num_subdomains();
    row.n = static_cast<long>(sys.num_dofs());
    row.n_gamma = static_cast<long>(classify_dofs(dec).interface.size());
    row.n_boundary = dec.grid.boundary_edge_count();
    row.iter = corr.report.iterations;
    row.cond = corr.report.condition;
    row.converged = corr.report.converged;
    out.rows.push_back(row);
    out.reports.push_back(std::move(corr.report));

    if (lev > 0) {
      u0 = m.prolongate(lev - 1, u);
    } else {
      out.flux = u;
      out.pressure = project_zero_mean(corr.pressure, sys.areas);
    }
  }
  return out;
}

NestedResult nested_solve(const ExperimentSpec& spec) {
  const Problem p = build_problem(spec);
  NestedOptions opt;
  opt.tol = spec.tol;
  opt.max_iterations = spec.max_iterations;
  return nested_solve(*p.precond, opt);
}

FluxPressure oracle_direct_solve(const Rt0System& sys) {
  if (!check_compatibility(sys.g))
    throw InconsistentSystemError("sources do not sum to zero");
  const KktSystem kkt{sys.A, sys.B, SparseMatrix(0, sys.num_flux()), pressure_gauge(sys.areas)};
  const KktSolution s = solve_constrained(kkt, Vector::Zero(sys.num_flux()), sys.g, {},
                                          GaugePolicy::RequireConsistent);
  return {s.flux, s.pressure};
}

namespace {

ExperimentSpec table_spec(int levels, int ratio) {
  ExperimentSpec s;
  s.name = "L" + std::to_string(levels) + "-r" + std::to_string(ratio);
  s.levels = levels;
  s.ratio = ratio;
  return s;
}

ExperimentSpec fig3_spec(CoefficientPattern pattern) {
  ExperimentSpec s = table_spec(4, 3);
  s.name = pattern == CoefficientPattern::JumpLeft ? "fig3-left" : "fig3-right";
  s.pattern = pattern;
  s.k1 = 100.0;
  s.k2 = 1.0;
  s.k3 = 0.01;
  s.gamma = 1.0;
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"table1-ratio3", "table1-ratio4", "table1-ratio6", "table1-ratio8",
          "table1-ratio16", "table1-ratio32", "fig3-left", "fig3-right"};
}

std::vector<ExperimentSpec> preset(const std::string& name) {
  auto levels = [](int ratio, int max_levels) {
    std::vector<ExperimentSpec> v;
    for (int L = 2; L <= max_levels; ++L) v.push_back(table_spec(L, ratio));
    return v;
  };
  if (name == "table1-ratio3") return levels(3, 5);
  if (name == "table1-ratio4") return levels(4, 4);
  if (name == "table1-ratio6") return levels(6, 3);
  if (name == "table1-ratio8") return levels(8, 3);
  if (name == "table1-ratio16") return levels(16, 2);
  if (name == "table1-ratio32") return levels(32, 2);
  if (name == "fig3-left") return {fig3_spec(CoefficientPattern::JumpLeft)};
  if (name == "fig3-right") return {fig3_spec(CoefficientPattern::JumpRight)};
  throw std::invalid_argument("unknown preset '" + name + "'");
}

void write_csv_row(std::ostream& os, const ResultRow& r) {
  char cond[32];
  std::snprintf(cond, sizeof cond, "%.2f", r.cond);
  os << r.L << ',' << r.level << ',' << r.M << ',' << r.nsub << ',' << r.n << ',' << r.n_gamma
     << ',' << r.iter << ',' << cond << '\n';
}

TableRun run_table(const std::vector<ExperimentSpec>& specs, std::ostream& csv) {
  TableRun run;
  csv << kCsvHeader << '\n';
  for (const ExperimentSpec& spec : specs) {
    try {
      NestedResult r = nested_solve(spec);
      for (const ResultRow& row : r.rows) {
        write_csv_row(csv, row);
        run.rows.push_back(row);
      }
      for (auto& rep : r.reports) run.reports.push_back(std::move(rep));
    } catch (const std::exception& e) {
      run.errors.push_back((spec.name.empty() ? std::string("spec") : spec.name) + ": " + e.what());
    }
  }
  return run;
}

}  // namespace nbddc
