#include "nbddc/hierarchy.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace nbddc {

HierarchyConfig HierarchyConfig::uniform(int levels, int ratio, double gamma) {
  if (levels < 2) throw std::invalid_argument("need at least two levels");
  HierarchyConfig c;
  c.levels = levels;
  c.ratios.assign(static_cast<std::size_t>(levels - 1), ratio);
  c.gamma = gamma;
  return c;
}

int HierarchyConfig::total_ratio() const {
  int t = 1;
  for (int r : ratios) t *= r;
  return t;
}

namespace {

LevelDecomposition decompose(const QuadMesh& g, int level, int r) {
  LevelDecomposition d;
  d.level = level;
  d.ratio = r;
  d.grid = g;
  d.coarse_grid = build_grid(g.nx / r, g.ny / r, g.hx * r, g.hy * r);
  const QuadMesh& c = d.coarse_grid;

  d.cell_subdomain.resize(static_cast<std::size_t>(g.num_cells()));
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) d.cell_subdomain[g.cell(i, j)] = c.cell(i / r, j / r);

  d.faces.resize(static_cast<std::size_t>(c.num_flux()));
  d.dof_face.assign(static_cast<std::size_t>(g.num_flux()), -1);
  for (int J = 0; J < c.ny; ++J) {
    for (int I = 0; I < c.nx; ++I) {
      if (I + 1 < c.nx) {
        Face& f = d.faces[c.vertical_edge(I, J)];
        f.id = c.vertical_edge(I, J);
        f.lo = c.cell(I, J);
        f.hi = c.cell(I + 1, J);
        f.vertical = true;
        for (int j = J * r; j < (J + 1) * r; ++j) f.dofs.push_back(g.vertical_edge((I + 1) * r - 1, j));
      }
      if (J + 1 < c.ny) {
        Face& f = d.faces[c.horizontal_edge(I, J)];
        f.id = c.horizontal_edge(I, J);
        f.lo = c.cell(I, J);
        f.hi = c.cell(I, J + 1);
        f.vertical = false;
        for (int i = I * r; i < (I + 1) * r; ++i) f.dofs.push_back(g.horizontal_edge(i, (J + 1) * r - 1));
      }
    }
  }
  for (const Face& f : d.faces)
    for (int dof : f.dofs) d.dof_face[dof] = f.id;

  d.subdomains.resize(static_cast<std::size_t>(c.num_cells()));
  for (int J = 0; J < c.ny; ++J) {
    for (int I = 0; I < c.nx; ++I) {
      Subdomain& s = d.subdomains[c.cell(I, J)];
      s.id = c.cell(I, J);
      const int i0 = I * r, j0 = J * r;
      for (int j = j0; j < j0 + r; ++j)
        for (int i = i0; i < i0 + r; ++i) s.cells.push_back(g.cell(i, j));
      for (int j = j0; j < j0 + r; ++j)
        for (int i = i0; i < i0 + r - 1; ++i) s.dofs.push_back(g.vertical_edge(i, j));
      for (int j = j0; j < j0 + r - 1; ++j)
        for (int i = i0; i < i0 + r; ++i) s.dofs.push_back(g.horizontal_edge(i, j));
      s.num_interior = static_cast<int>(s.dofs.size());

      const auto coarse = c.cell_faces(s.id);
      for (int side = 0; side < 4; ++side) {
        s.faces[side] = coarse[side];
        if (coarse[side] < 0) continue;
        for (int dof : d.faces[coarse[side]].dofs) {
          s.dofs.push_back(dof);
          s.dof_side.push_back(side);
        }
      }
    }
  }
  return d;
}

}  // namespace

Hierarchy build_hierarchy(const QuadMesh& mesh, const HierarchyConfig& config) {
  if (config.levels < 2) throw std::invalid_argument("need at least two levels");
  if (static_cast<int>(config.ratios.size()) != config.levels - 1)
    throw std::invalid_argument("expected " + std::to_string(config.levels - 1) +
                                " ratios, got " + std::to_string(config.ratios.size()));
  for (int r : config.ratios)
    if (r < 2) throw std::invalid_argument("substructure ratio must be at least 2");
  if (config.gamma < 0.0 || !std::isfinite(config.gamma))
    throw std::invalid_argument("gamma must be finite and non-negative");
  const int t = config.total_ratio();
  if (mesh.nx % t != 0 || mesh.ny % t != 0)
    throw std::invalid_argument("mesh " + std::to_string(mesh.nx) + "x" + std::to_string(mesh.ny) +
                                " is not divisible by the total ratio " + std::to_string(t));

  Hierarchy h;
  h.config = config;
  h.grids.push_back(mesh);
  for (int l = 0; l + 1 < config.levels; ++l) {
    h.levels.push_back(decompose(h.grids.back(), l, config.ratios[l]));
    h.grids.push_back(h.levels.back().coarse_grid);
  }
  return h;
}

DofPartition classify_dofs(const LevelDecomposition& level) {
  DofPartition p;
  for (int dof = 0; dof < level.grid.num_flux(); ++dof)
    (level.dof_face[dof] < 0 ? p.interior : p.interface).push_back(dof);
  p.coarse_flux = level.num_faces();
  p.coarse_pressure = level.num_subdomains();
  return p;
}

std::vector<std::pair<int, double>> face_average_functional(const Face& face) {
  if (face.dofs.empty()) throw std::invalid_argument("empty face");
  const double w = 1.0 / static_cast<double>(face.dofs.size());
  std::vector<std::pair<int, double>> row;
  for (int dof : face.dofs) row.emplace_back(dof, w);
  return row;
}

double face_average(const Face& face, const Vector& u) {
  double s = 0.0;
  for (const auto& [dof, w] : face_average_functional(face)) s += w * u[dof];
  return s;
}

double AveragingWeights::weight(const LevelDecomposition& level, int dof, int sub) const {
  const int f = level.dof_face[dof];
  if (f < 0) return 1.0;
  const Face& fc = level.faces[f];
  if (fc.lo == sub) return face[f][0];
  if (fc.hi == sub) return face[f][1];
  throw std::invalid_argument("dof does not belong to the substructure");
}

AveragingWeights compute_weights(const Hierarchy& h, int level, const CoefficientField& coeff) {
  if (level < 0 || level >= static_cast<int>(h.levels.size()))
    throw std::out_of_range("level index");
  const QuadMesh& fine = h.grids.front();
  if (coeff.nx != fine.nx || coeff.ny != fine.ny)
    throw DimensionError("coefficient field does not match the fine mesh");

  const LevelDecomposition& d = h.levels[level];
  int s = 1;
  for (int m = 0; m <= level; ++m) s *= h.config.ratios[m];   // fine cells per substructure
  const double gamma = h.config.gamma;

  AveragingWeights w;
  w.gamma = gamma;
  w.face.assign(d.faces.size(), {0.5, 0.5});
  if (gamma == 0.0) return w;

  for (const Face& f : d.faces) {
    const auto [I, J] = d.coarse_grid.cell_position(f.lo);
    double klo = 0.0, khi = 0.0;
    for (int t = 0; t < s; ++t) {
      int lo_cell, hi_cell;
      if (f.vertical) {
        lo_cell = fine.cell((I + 1) * s - 1, J * s + t);
        hi_cell = fine.cell((I + 1) * s, J * s + t);
      } else {
        lo_cell = fine.cell(I * s + t, (J + 1) * s - 1);
        hi_cell = fine.cell(I * s + t, (J + 1) * s);
      }
      if (t == 0) {
        klo = coeff[lo_cell];
        khi = coeff[hi_cell];
      } else if (coeff[lo_cell] != klo || coeff[hi_cell] != khi) {
        throw std::invalid_argument("coefficient varies along face " + std::to_string(f.id) +
                                    " on level " + std::to_string(level + 1) +
                                    "; rho-scaling needs a constant value on each side");
      }
    }
    const double a = std::pow(klo, -gamma), b = std::pow(khi, -gamma);
    w.face[f.id] = {a / (a + b), b / (a + b)};
  }
  return w;
}

std::string hierarchy_summary(const Hierarchy& h) {
  using nlohmann::json;
  json out;
  out["levels"] = h.config.levels;
  out["ratios"] = h.config.ratios;
  out["gamma"] = h.config.gamma;
  json lv = json::array();
  for (const auto& d : h.levels) {
    const DofPartition p = classify_dofs(d);
    lv.push_back({{"level", d.level + 1},
                  {"nx", d.grid.nx},
                  {"ny", d.grid.ny},
                  {"flux", d.grid.num_flux()},
                  {"pressure", d.grid.num_pressure()},
                  {"nsub", d.num_subdomains()},
                  {"faces", d.num_faces()},
                  {"interior", p.interior.size()},
                  {"interface", p.interface.size()}});
  }
  out["decompositions"] = lv;
  const QuadMesh& top = h.top_grid();
  out["top"] = {{"level", h.config.levels},
                {"nx", top.nx},
                {"ny", top.ny},
                {"flux", top.num_flux()},
                {"pressure", top.num_pressure()}};
  return out.dump(2);
}

}  // namespace nbddc
