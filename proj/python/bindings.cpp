#include "nbddc/nested.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace nbddc;

namespace {

CoefficientPattern pattern_from(const std::string& s) {
  if (s == "constant") return CoefficientPattern::Constant;
  if (s == "jump-left") return CoefficientPattern::JumpLeft;
  if (s == "jump-right") return CoefficientPattern::JumpRight;
  throw py::value_error("coefficient pattern must be constant, jump-left or jump-right");
}

std::string pattern_name(CoefficientPattern p) {
  switch (p) {
    case CoefficientPattern::JumpLeft: return "jump-left";
    case CoefficientPattern::JumpRight: return "jump-right";
    default: return "constant";
  }
}

py::dict result_dict(const NestedResult& r) {
  py::dict d;
  d["flux"] = r.flux;
  d["pressure"] = r.pressure;
  d["rows"] = r.rows;
  d["converged"] = r.converged();
  py::list hist;
  for (const PcgReport& rep : r.reports) hist.append(rep.residuals);
  d["residuals"] = hist;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Nested BDDC solver core";

  py::register_exception<InconsistentSystemError>(m, "InconsistentSystemError", PyExc_ValueError);
  py::register_exception<IndefiniteOperatorError>(m, "IndefiniteOperatorError", PyExc_RuntimeError);

  py::class_<ExperimentSpec>(m, "ExperimentSpec")
      .def(py::init([](int levels, int ratio, const std::string& coeff, double k1, double k2,
                       double k3, double gamma, double tol, int max_iterations, int coarse_cells) {
             ExperimentSpec s;
             s.levels = levels;
             s.ratio = ratio;
             s.pattern = pattern_from(coeff);
             s.k1 = k1;
             s.k2 = k2;
             s.k3 = k3;
             s.gamma = gamma;
             s.tol = tol;
             s.max_iterations = max_iterations;
             s.coarse_cells = coarse_cells;
             return s;
           }),
           py::arg("levels") = 2, py::arg("ratio") = 3, py::arg("coeff") = "constant",
           py::arg("k1") = 1.0, py::arg("k2") = 1.0, py::arg("k3") = 1.0, py::arg("gamma") = 0.0,
           py::arg("tol") = 1e-6, py::arg("max_iterations") = 500, py::arg("coarse_cells") = 0)
      .def_readwrite("name", &ExperimentSpec::name)
      .def_readwrite("levels", &ExperimentSpec::levels)
      .def_readwrite("ratio", &ExperimentSpec::ratio)
      .def_readwrite("coarse_cells", &ExperimentSpec::coarse_cells)
      .def_property(
          "coeff", [](const ExperimentSpec& s) { return pattern_name(s.pattern); },
          [](ExperimentSpec& s, const std::string& v) { s.pattern = pattern_from(v); })
      .def_readwrite("k1", &ExperimentSpec::k1)
      .def_readwrite("k2", &ExperimentSpec::k2)
      .def_readwrite("k3", &ExperimentSpec::k3)
      .def_readwrite("gamma", &ExperimentSpec::gamma)
      .def_readwrite("tol", &ExperimentSpec::tol)
      .def_readwrite("max_iterations", &ExperimentSpec::max_iterations)
      .def_property_readonly("mesh_cells", &ExperimentSpec::mesh_cells)
      .def("validate", &ExperimentSpec::validate)
      .def("__repr__", [](const ExperimentSpec& s) {
        std::ostringstream os;
        os << "ExperimentSpec(levels=" << s.levels << ", ratio=" << s.ratio << ", coeff='"
           << pattern_name(s.pattern) << "', gamma=" << s.gamma << ")";
        return os.str();
      });

  py::class_<ResultRow>(m, "ResultRow")
      .def_readonly("L", &ResultRow::L)
      .def_readonly("level", &ResultRow::level)
      .def_readonly("M", &ResultRow::M)
      .def_readonly("nsub", &ResultRow::nsub)
      .def_readonly("n", &ResultRow::n)
      .def_readonly("n_gamma", &ResultRow::n_gamma)
      .def_readonly("n_boundary", &ResultRow::n_boundary)
      .def_readonly("iter", &ResultRow::iter)
      .def_readonly("cond", &ResultRow::cond)
      .def_readonly("converged", &ResultRow::converged)
      .def("__repr__", [](const ResultRow& r) {
        std::ostringstream os;
        write_csv_row(os, r);
        std::string s = os.str();
        s.pop_back();
        return "ResultRow(" + s + ")";
      });

  py::class_<Problem>(m, "Problem")
      .def(py::init([](const ExperimentSpec& s) { return build_problem(s); }), py::arg("spec"))
      .def(py::init([](const ExperimentSpec& s, const std::vector<double>& k) {
             const QuadMesh mesh = build_mesh(s.mesh_cells(), s.mesh_cells());
             return build_problem(s, CoefficientField::from_values(mesh, k));
           }),
           py::arg("spec"), py::arg("coefficient"))
      .def_property_readonly("num_levels", [](const Problem& p) { return p.precond->num_levels(); })
      .def_property_readonly("coefficient", [](const Problem& p) { return p.coeff.values; })
      .def("dims", [](const Problem& p, int level) {
             const Rt0System& s = p.precond->system(level);
             return py::make_tuple(s.num_flux(), s.num_pressure());
           }, py::arg("level") = 0)
      .def("apply", [](const Problem& p, int level, const Vector& r) {
             py::gil_scoped_release release;
             const FluxPressure z = p.precond->apply(level, r);
             return std::make_pair(z.flux, z.pressure);
           }, py::arg("level"), py::arg("residual"),
           "Multilevel BDDC preconditioner started on `level` (0 = finest).")
      .def("divergence", [](const Problem& p, const Vector& u, int level) {
             return Vector(p.precond->system(level).B * u);
           }, py::arg("flux"), py::arg("level") = 0)
      .def("energy_norm", [](const Problem& p, const Vector& u, int level) {
             return p.precond->system(level).energy_norm(u);
           }, py::arg("flux"), py::arg("level") = 0)
      .def("solve", [](const Problem& p, double tol, int max_iterations) {
             NestedOptions opt;
             opt.tol = tol;
             opt.max_iterations = max_iterations;
             NestedResult r;
             {
               py::gil_scoped_release release;
               r = nested_solve(*p.precond, opt);
             }
             return result_dict(r);
           }, py::arg("tol") = 1e-6, py::arg("max_iterations") = 500)
      .def("direct_solve", [](const Problem& p) {
             FluxPressure s;
             {
               py::gil_scoped_release release;
               s = oracle_direct_solve(p.fine());
             }
             return std::make_pair(s.flux, s.pressure);
           });

  m.def("nested_solve", [](const ExperimentSpec& s) {
          NestedResult r;
          {
            py::gil_scoped_release release;
            r = nested_solve(s);
          }
          return result_dict(r);
        }, py::arg("spec"));
  m.def("preset", &preset, py::arg("name"));
  m.def("preset_names", &preset_names);
  m.def("run_table", [](const std::vector<ExperimentSpec>& specs) {
          std::ostringstream os;
          const TableRun run = run_table(specs, os);
          return py::make_tuple(os.str(), run.errors);
        }, py::arg("specs"), "Returns (csv_text, errors).");
  m.def("hierarchy_summary", [](int levels, int ratio, double gamma, int coarse_cells) {
          ExperimentSpec s;
          s.levels = levels;
          s.ratio = ratio;
          s.gamma = gamma;
          s.coarse_cells = coarse_cells;
          s.validate();
          const QuadMesh mesh = build_mesh(s.mesh_cells(), s.mesh_cells());
          return hierarchy_summary(build_hierarchy(mesh, HierarchyConfig::uniform(levels, ratio, gamma)));
        }, py::arg("levels"), py::arg("ratio"), py::arg("gamma") = 0.0, py::arg("coarse_cells") = 0);
}
