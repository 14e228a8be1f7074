#include "nbddc/bddc.hpp"

#include <stdexcept>
#include <string>
#include <unordered_map>

namespace nbddc {

SubdomainBlock build_subdomain_block(const Rt0System& sys, const LevelDecomposition& dec,
                                     const Subdomain& sub, const AveragingWeights& weights) {
  SubdomainBlock b;
  b.id = sub.id;
  b.num_interior = sub.num_interior;
  const int n = static_cast<int>(sub.dofs.size());
  const int nc = static_cast<int>(sub.cells.size());

  std::unordered_map<int, int> local;
  local.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) local.emplace(sub.dofs[k], k);

  std::vector<Triplet> ta, tb;
  for (int lc = 0; lc < nc; ++lc) {
    const int c = sub.cells[lc];
    const auto faces = dec.grid.cell_faces(c);
    for (int s = 0; s < 4; ++s) {
      if (faces[s] < 0) continue;
      const int ls = local.at(faces[s]);
      tb.emplace_back(lc, ls, sys.element_divergence[c](s));
      for (int t = 0; t < 4; ++t)
        if (faces[t] >= 0) ta.emplace_back(ls, local.at(faces[t]), sys.element_mass[c](s, t));
    }
  }
  b.A.resize(n, n);
  b.A.setFromTriplets(ta.begin(), ta.end());
  b.B.resize(nc, n);
  b.B.setFromTriplets(tb.begin(), tb.end());

  std::vector<Triplet> tc;
  for (int side = 0; side < 4; ++side) {
    if (sub.faces[side] < 0) continue;
    const int row = static_cast<int>(b.face_ids.size());
    b.face_ids.push_back(sub.faces[side]);
    b.face_sides.push_back(side);
    const double w = 1.0 / static_cast<double>(dec.faces[sub.faces[side]].dofs.size());
    for (int k = sub.num_interior; k < n; ++k)
      if (sub.dof_side[k - sub.num_interior] == side) tc.emplace_back(row, k, w);
  }
  b.C.resize(static_cast<Index>(b.face_ids.size()), n);
  b.C.setFromTriplets(tc.begin(), tc.end());

  Vector areas(nc);
  for (int lc = 0; lc < nc; ++lc) areas[lc] = sys.areas[sub.cells[lc]];
  b.gauge = pressure_gauge(areas);

  b.weight = Vector::Ones(n);
  for (int k = sub.num_interior; k < n; ++k) b.weight[k] = weights.weight(dec, sub.dofs[k], sub.id);

  const int ni = sub.num_interior;
  KktSystem interior{b.A.block(0, 0, ni, ni), b.B.leftCols(ni), SparseMatrix(0, ni), b.gauge};
  b.interior = KktSolver(interior);
  b.delta = KktSolver(KktSystem{b.A, b.B, b.C, b.gauge});
  return b;
}

Matrix build_coarse_basis(const SubdomainBlock& b) {
  const Index nf = static_cast<Index>(b.face_ids.size());
  Matrix psi(b.delta.num_flux(), nf);
  for (Index j = 0; j < nf; ++j)
    psi.col(j) = b.delta.solve({}, {}, Vector::Unit(nf, j)).flux;
  return psi;
}

Rt0System assemble_coarse_problem(const LevelDecomposition& dec,
                                  const std::vector<SubdomainBlock>& blocks) {
  if (static_cast<int>(blocks.size()) != dec.num_subdomains())
    throw DimensionError("one block per substructure expected");
  std::vector<Eigen::Matrix4d> mass(blocks.size(), Eigen::Matrix4d::Zero());
  std::vector<Eigen::Vector4d> div(blocks.size(), Eigen::Vector4d::Zero());
  for (const SubdomainBlock& b : blocks) {
    if (b.psi.cols() != static_cast<Index>(b.face_ids.size()))
      throw std::logic_error("coarse basis missing for substructure " + std::to_string(b.id));
    const Matrix apsi = b.A * b.psi;
    const Matrix m = b.psi.transpose() * apsi;
    const Vector colsum = b.B.transpose() * Vector::Ones(b.B.rows());
    for (std::size_t s = 0; s < b.face_sides.size(); ++s) {
      const int is = b.face_sides[s];
      div[b.id](is) = colsum.dot(b.psi.col(static_cast<Index>(s)));
      for (std::size_t t = 0; t < b.face_sides.size(); ++t)
        mass[b.id](is, b.face_sides[t]) = m(static_cast<Index>(s), static_cast<Index>(t));
    }
  }
  // the Galerkin product is symmetric only up to round-off
  for (auto& m : mass) m = 0.5 * (m + m.transpose()).eval();
  return assemble_from_elements(dec.coarse_grid, std::move(mass), std::move(div));
}

Vector restrict_pressure(const LevelDecomposition& dec, const Vector& g) {
  if (g.size() != dec.grid.num_cells()) throw DimensionError("restrict: pressure length");
  Vector out = Vector::Zero(dec.num_subdomains());
  for (int c = 0; c < dec.grid.num_cells(); ++c) out[dec.cell_subdomain[c]] += g[c];
  return out;
}

Vector expand_pressure(const LevelDecomposition& dec, const Vector& coarse) {
  if (coarse.size() != dec.num_subdomains()) throw DimensionError("expand: pressure length");
  Vector out(dec.grid.num_cells());
  for (int c = 0; c < dec.grid.num_cells(); ++c) out[c] = coarse[dec.cell_subdomain[c]];
  return out;
}

MultilevelPreconditioner::MultilevelPreconditioner(Hierarchy hierarchy, Rt0System fine,
                                                   const CoefficientField& coeff)
    : hierarchy_(std::move(hierarchy)) {
  const QuadMesh& g0 = hierarchy_.grids.front();
  if (fine.grid.nx != g0.nx || fine.grid.ny != g0.ny)
    throw DimensionError("fine system does not match the hierarchy");
  if (fine.g.size() != fine.num_pressure()) fine.g = Vector::Zero(fine.num_pressure());
  systems_.push_back(std::move(fine));

  for (int k = 0; k + 1 < num_levels(); ++k) {
    const LevelDecomposition& dec = hierarchy_.levels[k];
    LevelComponents comp;
    comp.level = k;
    comp.weights = compute_weights(hierarchy_, k, coeff);
    comp.blocks.reserve(dec.subdomains.size());
    for (const Subdomain& sub : dec.subdomains) {
      comp.blocks.push_back(build_subdomain_block(systems_[k], dec, sub, comp.weights));
      comp.blocks.back().psi = build_coarse_basis(comp.blocks.back());
    }
    Rt0System coarse = assemble_coarse_problem(dec, comp.blocks);
    coarse.g = restrict_pressure(dec, systems_[k].g);
    levels_.push_back(std::move(comp));
    systems_.push_back(std::move(coarse));
  }

  const Rt0System& top = systems_.back();
  top_ = KktSolver(KktSystem{top.A, top.B, SparseMatrix(0, top.num_flux()),
                             pressure_gauge(top.areas)});
}

FluxPressure MultilevelPreconditioner::solve_top(const Vector& flux_rhs,
                                                 const Vector& pressure_rhs) const {
  const KktSolution s = top_.solve(flux_rhs, pressure_rhs);
  return {s.flux, s.pressure};
}

FluxPressure MultilevelPreconditioner::interior_correction(int level, const Vector& f,
                                                           const Vector& g) const {
  const Rt0System& sys = systems_.at(level);
  const LevelDecomposition& dec = hierarchy_.levels.at(level);
  if (f.size() != sys.num_flux()) throw DimensionError("interior: flux rhs length");
  if (g.size() != 0 && g.size() != sys.num_pressure())
    throw DimensionError("interior: pressure rhs length");

  FluxPressure out{Vector::Zero(sys.num_flux()), Vector::Zero(sys.num_pressure())};
  for (const SubdomainBlock& b : levels_[level].blocks) {
    const Subdomain& sub = dec.subdomains[b.id];
    Vector fi(b.num_interior);
    for (int k = 0; k < b.num_interior; ++k) fi[k] = f[sub.dofs[k]];
    Vector gi;
    if (g.size()) {
      gi.resize(static_cast<Index>(sub.cells.size()));
      for (std::size_t k = 0; k < sub.cells.size(); ++k) gi[static_cast<Index>(k)] = g[sub.cells[k]];
    }
    const KktSolution s = b.interior.solve(fi, gi);
    for (int k = 0; k < b.num_interior; ++k) out.flux[sub.dofs[k]] = s.flux[k];
    for (std::size_t k = 0; k < sub.cells.size(); ++k)
      out.pressure[sub.cells[k]] = s.pressure[static_cast<Index>(k)];
  }
  return out;
}

namespace {

// Weighted restriction of an interface residual to one substructure.
Vector local_interface_rhs(const SubdomainBlock& b, const Subdomain& sub, const Vector& r) {
  Vector f = Vector::Zero(b.num_dofs());
  for (int k = b.num_interior; k < b.num_dofs(); ++k) f[k] = b.weight[k] * r[sub.dofs[k]];
  return f;
}

}  // namespace

std::vector<Vector> MultilevelPreconditioner::delta_correction(int level, const Vector& r) const {
  const LevelDecomposition& dec = hierarchy_.levels.at(level);
  if (r.size() != dec.grid.num_flux()) throw DimensionError("delta: residual length");
  std::vector<Vector> out;
  out.reserve(levels_[level].blocks.size());
  for (const SubdomainBlock& b : levels_[level].blocks)
    out.push_back(b.delta.solve(local_interface_rhs(b, dec.subdomains[b.id], r)).flux);
  return out;
}

Vector MultilevelPreconditioner::average(int level, const std::vector<Vector>& local) const {
  const LevelDecomposition& dec = hierarchy_.levels.at(level);
  const auto& blocks = levels_[level].blocks;
  if (local.size() != blocks.size()) throw DimensionError("average: one vector per substructure");
  Vector u = Vector::Zero(dec.grid.num_flux());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const SubdomainBlock& b = blocks[i];
    const Subdomain& sub = dec.subdomains[b.id];
    if (local[i].size() != b.num_dofs()) throw DimensionError("average: local length");
    for (int k = 0; k < b.num_dofs(); ++k) u[sub.dofs[k]] += b.weight[k] * local[i][k];
  }
  return u;
}

Vector MultilevelPreconditioner::coarse_residual(int level, const Vector& r) const {
  const LevelDecomposition& dec = hierarchy_.levels.at(level);
  if (r.size() != dec.grid.num_flux()) throw DimensionError("coarse residual: length");
  Vector rc = Vector::Zero(dec.num_faces());
  for (const SubdomainBlock& b : levels_[level].blocks) {
    const Vector proj = b.psi.transpose() * local_interface_rhs(b, dec.subdomains[b.id], r);
    for (std::size_t j = 0; j < b.face_ids.size(); ++j) rc[b.face_ids[j]] += proj[static_cast<Index>(j)];
  }
  return rc;
}

Vector MultilevelPreconditioner::prolongate(int level, const Vector& uc) const {
  const LevelDecomposition& dec = hierarchy_.levels.at(level);
  if (uc.size() != dec.num_faces()) throw DimensionError("prolongate: coarse length");
  std::vector<Vector> local;
  local.reserve(levels_[level].blocks.size());
  for (const SubdomainBlock& b : levels_[level].blocks) {
    Vector c(static_cast<Index>(b.face_ids.size()));
    for (std::size_t j = 0; j < b.face_ids.size(); ++j) c[static_cast<Index>(j)] = uc[b.face_ids[j]];
    local.push_back(b.psi * c);
  }
  return average(level, local);
}

FluxPressure MultilevelPreconditioner::apply(int level, const Vector& r) const {
  if (level < 0 || level >= num_levels()) throw std::out_of_range("preconditioner level");
  const Rt0System& sys = systems_[level];
  if (r.size() != sys.num_flux()) throw DimensionError("apply: residual length");
  if (level == num_levels() - 1) return solve_top(r, Vector::Zero(sys.num_pressure()));

  const LevelDecomposition& dec = hierarchy_.levels[level];
  const auto& blocks = levels_[level].blocks;

  const FluxPressure pre = interior_correction(level, r);
  const Vector rb = r - sys.A * pre.flux - sys.B.transpose() * pre.pressure;

  std::vector<Vector> local;
  local.reserve(blocks.size());
  Vector rc = Vector::Zero(dec.num_faces());
  for (const SubdomainBlock& b : blocks) {
    const Vector f = local_interface_rhs(b, dec.subdomains[b.id], rb);
    local.push_back(b.delta.solve(f).flux);
    const Vector proj = b.psi.transpose() * f;
    for (std::size_t j = 0; j < b.face_ids.size(); ++j) rc[b.face_ids[j]] += proj[static_cast<Index>(j)];
  }

  const FluxPressure coarse = apply(level + 1, rc);

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const SubdomainBlock& b = blocks[i];
    Vector c(static_cast<Index>(b.face_ids.size()));
    for (std::size_t j = 0; j < b.face_ids.size(); ++j) c[static_cast<Index>(j)] = coarse.flux[b.face_ids[j]];
    local[i] += b.psi * c;
  }
  const Vector ub = average(level, local);
  const FluxPressure post = interior_correction(level, sys.A * ub, sys.B * ub);

  return {pre.flux + ub - post.flux,
          pre.pressure + expand_pressure(dec, coarse.pressure) - post.pressure};
}

FluxPressure apply_two_level(const MultilevelPreconditioner& m, const Vector& residual) {
  return m.apply(m.num_levels() - 2, residual);
}

FluxPressure apply_multilevel(const MultilevelPreconditioner& m, const Vector& residual,
                              int level) {
  return m.apply(level, residual);
}

}  // namespace nbddc
