// bddc: run nested BDDC experiments and write the result table as CSV.
//
//   bddc solve --levels 3 --ratio 3 --out results.csv
//   bddc solve --preset table1-ratio3 --verify
//   bddc hierarchy --levels 3 --ratio 4
//   bddc solve --config run.toml

#include "nbddc/nested.hpp"

#include <CLI11.hpp>
#include <unsupported/Eigen/SparseExtra>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

using namespace nbddc;

namespace {

enum Exit { kOk = 0, kInvalid = 2, kNotConverged = 3, kVerifyFailed = 4 };

struct SolveArgs {
  int levels = 2;
  int ratio = 3;
  int coarse_cells = 0;
  std::string coeff = "constant";
  double k1 = 1.0, k2 = 1.0, k3 = 1.0;
  int gamma = 0;
  double tol = 1e-6;
  int max_iterations = 500;
  std::string out;
  std::string preset;
  bool verify = false;
  bool dump_history = false;
  std::string dump_matrices;
  bool quiet = false;
};

CoefficientPattern parse_pattern(const std::string& s) {
  if (s == "constant") return CoefficientPattern::Constant;
  if (s == "jump-left") return CoefficientPattern::JumpLeft;
  if (s == "jump-right") return CoefficientPattern::JumpRight;
  throw std::invalid_argument("unknown coefficient pattern '" + s + "'");
}

std::vector<ExperimentSpec> make_specs(const SolveArgs& a, const CLI::App& app) {
  if (!a.preset.empty()) {
    std::vector<ExperimentSpec> specs = preset(a.preset);
    for (ExperimentSpec& s : specs) {
      if (app.count("--tol")) s.tol = a.tol;
      if (app.count("--max-iterations")) s.max_iterations = a.max_iterations;
    }
    return specs;
  }
  ExperimentSpec s;
  s.name = "cli";
  s.levels = a.levels;
  s.ratio = a.ratio;
  s.coarse_cells = a.coarse_cells;
  s.pattern = parse_pattern(a.coeff);
  s.k1 = a.k1;
  s.k2 = a.k2;
  s.k3 = a.k3;
  s.gamma = a.gamma;
  s.tol = a.tol;
  s.max_iterations = a.max_iterations;
  return {s};
}

void print_table(const std::vector<ResultRow>& rows, std::ostream& os) {
  os << "   L  level   M    nsub          n   n+bdry   n_gamma  iter    cond\n";
  for (const ResultRow& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%4d %6d %3d %7d %10ld %8ld %9ld %5d %7.2f%s\n", r.L, r.level,
                  r.M, r.nsub, r.n, r.n + r.n_boundary, r.n_gamma, r.iter, r.cond,
                  r.converged ? "" : "  (not converged)");
    os << line;
  }
}

void dump_matrices(const Problem& p, const std::string& prefix) {
  const Rt0System& s = p.fine();
  Eigen::saveMarket(s.A, prefix + "_A.mtx");
  Eigen::saveMarket(s.B, prefix + "_B.mtx");
  Eigen::saveMarketVector(s.g, prefix + "_g.mtx");
}

int run_solve(const SolveArgs& a, const CLI::App& app) {
  std::vector<ExperimentSpec> specs;
  try {
    specs = make_specs(a, app);
    for (const ExperimentSpec& s : specs) s.validate();
  } catch (const std::exception& e) {
    std::cerr << "bddc: " << e.what() << '\n';
    return kInvalid;
  }

  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) {
      std::cerr << "bddc: cannot write " << a.out << '\n';
      return kInvalid;
    }
  }
  std::ostream& csv = a.out.empty() ? std::cout : file;
  std::ostream& log = a.out.empty() ? std::cerr : std::cout;

  std::ofstream history;
  if (a.dump_history) {
    const std::string path = (a.out.empty() ? std::string("bddc") : a.out) + ".history.csv";
    history.open(path);
    history << "spec,level,iteration,residual,preconditioned_residual,divergence_defect\n";
  }

  csv << kCsvHeader << '\n';
  std::vector<ResultRow> all;
  bool converged = true, verified = true;
  for (const ExperimentSpec& spec : specs) {
    Problem p;
    NestedResult res;
    try {
      p = build_problem(spec);
      if (!a.dump_matrices.empty()) dump_matrices(p, a.dump_matrices);
      NestedOptions opt;
      opt.tol = spec.tol;
      opt.max_iterations = spec.max_iterations;
      opt.monitor_divergence = a.dump_history;
      res = nested_solve(*p.precond, opt);
    } catch (const std::invalid_argument& e) {
      std::cerr << "bddc: " << spec.name << ": " << e.what() << '\n';
      return kInvalid;
    }
    for (const ResultRow& r : res.rows) {
      write_csv_row(csv, r);
      all.push_back(r);
    }
    csv.flush();
    converged = converged && res.converged();

    if (a.dump_history)
      for (std::size_t i = 0; i < res.reports.size(); ++i) {
        const PcgReport& rep = res.reports[i];
        for (std::size_t k = 0; k < rep.residuals.size(); ++k)
          history << spec.name << ',' << res.rows[i].level << ',' << k << ',' << rep.residuals[k]
                  << ',' << rep.preconditioned_residuals[k] << ','
                  << (k == 0 ? 0.0 : rep.monitor_values[k - 1]) << '\n';
      }

    if (a.verify) {
      const FluxPressure ref = oracle_direct_solve(p.fine());
      const double err = p.fine().energy_norm(res.flux - ref.flux) / p.fine().energy_norm(ref.flux);
      const double div = (p.fine().B * res.flux - p.fine().g).norm();
      const bool ok = err <= 1e-5 && div <= 1e-8;
      verified = verified && ok;
      char line[200];
      std::snprintf(line, sizeof line, "verify %s: relative A-norm error %.2e, ||Bu - g|| %.2e %s\n",
                    spec.name.c_str(), err, div, ok ? "ok" : "FAILED");
      log << line;
    }
  }
  if (!a.quiet) print_table(all, log);

  if (!converged) {
    std::cerr << "bddc: PCG did not converge on every level\n";
    return kNotConverged;
  }
  return verified ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested BDDC for mixed Darcy problems on the unit square"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML file with a [solve] section; command line flags win");

  SolveArgs a;
  CLI::App* solve = app.add_subcommand("solve", "Run one spec or a preset and write the CSV table");
  solve->fallthrough();
  solve->add_option("--levels,-L", a.levels, "Number of levels L (top solved directly)");
  solve->add_option("--ratio,-r", a.ratio, "Cells per substructure in each direction");
  solve->add_option("--coarse-cells", a.coarse_cells, "Top grid cells per direction (default: ratio)");
  solve->add_option("--coeff", a.coeff, "Coefficient pattern")
      ->check(CLI::IsMember({"constant", "jump-left", "jump-right"}));
  solve->add_option("--k1", a.k1, "Permeability (the constant pattern uses k1)");
  solve->add_option("--k2", a.k2, "Background permeability of the jump patterns");
  solve->add_option("--k3", a.k3, "Third permeability of the jump patterns");
  solve->add_option("--gamma", a.gamma, "Averaging: 0 multiplicity, 1 coefficient scaling")
      ->check(CLI::IsMember({0, 1}));
  solve->add_option("--tol", a.tol, "Relative residual tolerance");
  solve->add_option("--max-iterations", a.max_iterations, "PCG iteration cap per level");
  solve->add_option("--out,-o", a.out, "CSV output file (default: stdout)");
  solve->add_option("--preset", a.preset, "Named experiment list")
      ->check(CLI::IsMember(preset_names()));
  solve->add_flag("--verify", a.verify, "Compare against a direct solve of the fine system");
  solve->add_flag("--dump-history", a.dump_history, "Write residual histories to <out>.history.csv");
  solve->add_option("--dump-matrices", a.dump_matrices, "Write fine A, B, g as MatrixMarket with this prefix");
  solve->add_flag("--quiet,-q", a.quiet, "No human-readable table");

  int h_levels = 2, h_ratio = 3, h_coarse = 0;
  double h_gamma = 0.0;
  CLI::App* hier = app.add_subcommand("hierarchy", "Print the substructure hierarchy as JSON");
  hier->add_option("--levels,-L", h_levels, "Number of levels");
  hier->add_option("--ratio,-r", h_ratio, "Cells per substructure in each direction");
  hier->add_option("--coarse-cells", h_coarse, "Top grid cells per direction (default: ratio)");
  hier->add_option("--gamma", h_gamma, "Averaging exponent")->check(CLI::IsMember({0.0, 1.0}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  if (*hier) {
    try {
      ExperimentSpec s;
      s.levels = h_levels;
      s.ratio = h_ratio;
      s.coarse_cells = h_coarse;
      s.gamma = h_gamma;
      s.validate();
      const QuadMesh mesh = build_mesh(s.mesh_cells(), s.mesh_cells());
      std::cout << hierarchy_summary(build_hierarchy(mesh, HierarchyConfig::uniform(h_levels, h_ratio, h_gamma)))
                << '\n';
      return kOk;
    } catch (const std::exception& e) {
      std::cerr << "bddc: " << e.what() << '\n';
      return kInvalid;
    }
  }
  return run_solve(a, *solve);
}
