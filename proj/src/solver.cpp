#include "fvmm/solver.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>

#include "fvmm/fluxes.hpp"
#include "fvmm/physics.hpp"
#include "fvmm/remesh.hpp"

namespace fvmm {

namespace {

// One-sided circumcenter-to-facet distance used by the slab coupling. An
// obtuse fracture-adjacent cell can put its circumcenter across the facet;
// flooring the distance saturates the closure at its pressure-continuity
// limit instead of feeding a negative transmissibility into it.
constexpr double kCouplingDeltaFloor = 1e-9;

double lam_tot(const Fluids& f, double S) {
  return total_mobility(f, clamped_saturation(S));
}

double weighted_rho(const Fluids& f, double S) {
  return mobility_weighted_density(f, clamped_saturation(S));
}

}  // namespace

StepSystem::StepSystem(const MeshGeometry& geo, const CaseConfig& cfg,
                       const MeshState& old_state, double t_old)
    : geo_(&geo), cfg_(&cfg), dt_(geo.dt) {
  map_.n_cells = static_cast<int>(geo.cells.size());
  map_.n_iface = static_cast<int>(geo.iface.size());
  const double t_new = t_old + dt_;

  pin_pressure_ = true;
  for (const auto& b : cfg.bc)
    if (b.kind == BcKind::pressure) pin_pressure_ = false;

  cc_.resize(geo.cells.size());
  mass_old_bulk_.resize(geo.cells.size());
  for (std::size_t c = 0; c < geo.cells.size(); ++c) {
    const auto& cell = geo.cells[c];
    CellCoef& k = cc_[c];
    k.phi = cfg.porosity_of(cell.label);
    k.K = cfg.permeability(cell.label, cell.centroid_new, t_new);
    if (cell.label != 0) {
      k.qw = cfg.q_w;
      k.qnw = cfg.q_nw;
    }
    if (cell.tri >= static_cast<int>(old_state.S.size()))
      throw SolverError("cell state missing for triangle slot");
    mass_old_bulk_[c] = k.phi * old_state.S[static_cast<std::size_t>(cell.tri)] * cell.area_old;
  }

  ic_.resize(geo.iface.size());
  mass_old_iface_.resize(geo.iface.size());
  for (std::size_t j = 0; j < geo.iface.size(); ++j) {
    const auto& el = geo.iface[j];
    IfaceCoef& k = ic_[j];
    k.d_new = cfg.frac.aperture_of(el.mid_new, t_new);
    k.Ktau = slit_permeability(k.d_new);
    k.qw = cfg.q_w_frac;
    k.qnw = cfg.q_nw_frac;
    if (el.right >= 0) {
      k.node = el.mid_new + el.tau * (el.len_new * 0.5);
      k.d_node = cfg.frac.aperture_of(k.node, t_new);
    }
    auto it = old_state.S_if.find(MeshState::key(el.va, el.vb));
    if (it == old_state.S_if.end())
      throw SolverError("interface state missing for element");
    const double d_old = cfg.frac.aperture_of(el.mid_old, t_old);
    mass_old_iface_[j] = cfg.phi_frac * it->second * d_old * el.len_old;
  }

  build_sparsity();
}

std::vector<double> StepSystem::gather(const MeshState& state) const {
  std::vector<double> U(static_cast<std::size_t>(map_.size()), 0.0);
  for (int c = 0; c < map_.n_cells; ++c) {
    int tri = geo_->cells[static_cast<std::size_t>(c)].tri;
    U[static_cast<std::size_t>(map_.s_bulk(c))] = state.S[static_cast<std::size_t>(tri)];
    U[static_cast<std::size_t>(map_.p_bulk(c))] = state.P[static_cast<std::size_t>(tri)];
  }
  for (int j = 0; j < map_.n_iface; ++j) {
    const auto& el = geo_->iface[static_cast<std::size_t>(j)];
    auto key = MeshState::key(el.va, el.vb);
    U[static_cast<std::size_t>(map_.s_iface(j))] = state.S_if.at(key);
    U[static_cast<std::size_t>(map_.p_iface(j))] = state.P_if.at(key);
  }
  return U;
}

void StepSystem::scatter(const std::vector<double>& U, MeshState& state) const {
  for (int c = 0; c < map_.n_cells; ++c) {
    int tri = geo_->cells[static_cast<std::size_t>(c)].tri;
    state.S[static_cast<std::size_t>(tri)] = U[static_cast<std::size_t>(map_.s_bulk(c))];
    state.P[static_cast<std::size_t>(tri)] = U[static_cast<std::size_t>(map_.p_bulk(c))];
  }
  state.S_if.clear();
  state.P_if.clear();
  for (int j = 0; j < map_.n_iface; ++j) {
    const auto& el = geo_->iface[static_cast<std::size_t>(j)];
    auto key = MeshState::key(el.va, el.vb);
    state.S_if[key] = U[static_cast<std::size_t>(map_.s_iface(j))];
    state.P_if[key] = U[static_cast<std::size_t>(map_.p_iface(j))];
  }
}

void StepSystem::residual(const std::vector<double>& U, std::vector<double>& R) const {
  assemble(U, &R, nullptr);
}

StepSystem::Audit StepSystem::audit(const std::vector<double>& U) const {
  Audit a;
  assemble(U, nullptr, &a);
  return a;
}

void StepSystem::assemble(const std::vector<double>& U, std::vector<double>* Rout,
                          Audit* audit) const {
  const MeshGeometry& geo = *geo_;
  const CaseConfig& cfg = *cfg_;
  const Fluids& fl = cfg.fluids;
  const Vec2 g = cfg.gravity;
  const double drho = fl.rho_nw - fl.rho_w;

  std::vector<double> scratch;
  std::vector<double>& R = Rout ? *Rout : scratch;
  R.assign(static_cast<std::size_t>(map_.size()), 0.0);

  auto S_at = [&](int idx) { return U[static_cast<std::size_t>(idx)]; };

  // storage and sources
  for (int c = 0; c < map_.n_cells; ++c) {
    const auto& cell = geo.cells[static_cast<std::size_t>(c)];
    const CellCoef& k = cc_[static_cast<std::size_t>(c)];
    const double S = S_at(map_.s_bulk(c));
    R[static_cast<std::size_t>(map_.s_bulk(c))] =
        k.phi * S * cell.area_new - mass_old_bulk_[static_cast<std::size_t>(c)] -
        dt_ * k.qw * cell.area_new;
    R[static_cast<std::size_t>(map_.p_bulk(c))] = -(k.qw + k.qnw) * cell.area_new;
    if (audit) audit->injected_w += dt_ * k.qw * cell.area_new;
  }
  for (int j = 0; j < map_.n_iface; ++j) {
    const auto& el = geo.iface[static_cast<std::size_t>(j)];
    const IfaceCoef& k = ic_[static_cast<std::size_t>(j)];
    const double S = S_at(map_.s_iface(j));
    const double vol = k.d_new * el.len_new;
    R[static_cast<std::size_t>(map_.s_iface(j))] =
        cfg.phi_frac * S * vol - mass_old_iface_[static_cast<std::size_t>(j)] -
        dt_ * k.qw * vol;
    R[static_cast<std::size_t>(map_.p_iface(j))] = -(k.qw + k.qnw) * vol;
    if (audit) audit->injected_w += dt_ * k.qw * vol;
  }

  // potential and one-sided data of a bulk cell at a facet
  auto bulk_side = [&](const MeshGeometry::Facet& f, int c, double outward) {
    const auto& cell = geo.cells[static_cast<std::size_t>(c)];
    const CellCoef& k = cc_[static_cast<std::size_t>(c)];
    const double S = S_at(map_.s_bulk(c));
    const Vec2 n = f.n_hat * outward;
    TpfaSide side;
    side.P = S_at(map_.p_bulk(c));
    side.G = weighted_rho(fl, S) * dot(g, f.mid_new - cell.cc_new);
    side.delta = dot(f.mid_new - cell.cc_new, n);
    side.lk = lam_tot(fl, S) * quad_form(k.K, n, n);
    return side;
  };
  auto grav_coeff = [&](int c, const Vec2& n, double len) {
    return drho * quad_form(cc_[static_cast<std::size_t>(c)].K, n, g) * len;
  };

  for (const auto& f : geo.facets) {
    if (f.iface_elem >= 0) continue;  // coupling facets assemble with their element
    const int in = f.cell_in;
    const double S_in = S_at(map_.s_bulk(in));
    if (f.cell_out < 0) {
      const BoundaryCondition& bc = cfg.bc[static_cast<std::size_t>(f.bc_side)];
      if (bc.kind == BcKind::no_flow) continue;
      TpfaSide side = bulk_side(f, in, 1.0);
      if (side.delta <= 0.0)
        side.delta = std::max(std::abs(side.delta), kCouplingDeltaFloor * f.len_new);
      const double v = tpfa_boundary_flux(f.len_new, side, bc.value);
      // free boundary closure: the wetting split of the leaving flux is
      // evaluated at the inside state
      FluxFn law{fl, v, grav_coeff(in, f.n_hat, f.len_new)};
      const double gw = law(S_in);
      R[static_cast<std::size_t>(map_.s_bulk(in))] += dt_ * gw;
      R[static_cast<std::size_t>(map_.p_bulk(in))] += v;
      if (audit) audit->boundary_w_out += dt_ * gw;
      continue;
    }
    const int out = f.cell_out;
    const double S_out = S_at(map_.s_bulk(out));
    TpfaSide s_in = bulk_side(f, in, 1.0);
    TpfaSide s_out = bulk_side(f, out, -1.0);
    // signed circumcenter gaps reproduce linear fields exactly, but a strong
    // mobility contrast across an obtuse pair can drive the signed resistor
    // chain negative; those facets fall back to the unsigned distances,
    // which keep the chain positive at the cost of local consistency
    if (s_in.delta / s_in.lk + s_out.delta / s_out.lk <= 0.0) {
      s_in.delta = std::max(std::abs(s_in.delta), kCouplingDeltaFloor * f.len_new);
      s_out.delta = std::max(std::abs(s_out.delta), kCouplingDeltaFloor * f.len_new);
    }
    const double v = tpfa_flux(f.len_new, s_in, s_out);
    FluxFn law_in{fl, v, grav_coeff(in, f.n_hat, f.len_new)};
    FluxFn law_out{fl, v, grav_coeff(out, f.n_hat, f.len_new)};
    const double gw = godunov_flux(law_in, law_out, S_in, S_out);
    const double h = geometric_flux(cc_[static_cast<std::size_t>(in)].phi * S_in,
                                    cc_[static_cast<std::size_t>(out)].phi * S_out,
                                    dt_ > 0.0 ? f.swept / dt_ : 0.0);
    R[static_cast<std::size_t>(map_.s_bulk(in))] += dt_ * (gw + h);
    R[static_cast<std::size_t>(map_.s_bulk(out))] -= dt_ * (gw + h);
    R[static_cast<std::size_t>(map_.p_bulk(in))] += v;
    R[static_cast<std::size_t>(map_.p_bulk(out))] -= v;
  }

  for (int j = 0; j < map_.n_iface; ++j) {
    const auto& el = geo.iface[static_cast<std::size_t>(j)];
    const IfaceCoef& k = ic_[static_cast<std::size_t>(j)];
    const double S_if = S_at(map_.s_iface(j));
    const double P_if = S_at(map_.p_iface(j));

    // coupling through both sides; each evaluation feeds the bulk row and
    // the interface row with opposite signs
    const int fids[2] = {el.facet_plus, el.facet_minus};
    for (int s = 0; s < 2; ++s) {
      const auto& fn = geo.facets[static_cast<std::size_t>(fids[s])];
      const auto& ff = geo.facets[static_cast<std::size_t>(fids[1 - s])];
      const int near = fn.cell_in;
      const int far = ff.cell_in;
      TpfaSide ns = bulk_side(fn, near, 1.0);
      TpfaSide fs = bulk_side(ff, far, 1.0);
      const double dn = std::max(std::abs(ns.delta), kCouplingDeltaFloor * fn.len_new);
      const double df = std::max(std::abs(fs.delta), kCouplingDeltaFloor * ff.len_new);
      CouplingBulkSide cn{ns.P + ns.G, ns.lk * fn.len_new / dn};
      CouplingBulkSide cf{fs.P + fs.G, fs.lk * ff.len_new / df};
      const double T_if =
          2.0 / k.d_new * lam_tot(fl, S_if) * slit_permeability(k.d_new) * fn.len_new;
      const double G_if = -0.5 * k.d_new * weighted_rho(fl, S_if) * dot(g, fn.n_hat);
      const double v = coupling_flux(cn, cf, P_if, T_if, G_if);
      FluxFn law{fl, v, grav_coeff(near, fn.n_hat, fn.len_new)};
      const double gw = godunov_flux(law, S_at(map_.s_bulk(near)), S_if);
      R[static_cast<std::size_t>(map_.p_bulk(near))] += v;
      R[static_cast<std::size_t>(map_.p_iface(j))] -= v;
      R[static_cast<std::size_t>(map_.s_bulk(near))] += dt_ * gw;
      R[static_cast<std::size_t>(map_.s_iface(j))] -= dt_ * gw;
    }

    // tangential flux through the node shared with the right neighbor; tips
    // carry no tangential or swept flux
    if (el.right >= 0) {
      const int r = el.right;
      const auto& er = geo.iface[static_cast<std::size_t>(r)];
      const IfaceCoef& kr = ic_[static_cast<std::size_t>(r)];
      const double S_r = S_at(map_.s_iface(r));
      TpfaSide a;
      a.P = P_if;
      a.G = weighted_rho(fl, S_if) * dot(g, k.node - el.mid_new);
      a.delta = el.len_new * 0.5;
      a.lk = lam_tot(fl, S_if) * k.Ktau;
      TpfaSide b;
      b.P = S_at(map_.p_iface(r));
      b.G = weighted_rho(fl, S_r) * dot(g, k.node - er.mid_new);
      b.delta = er.len_new * 0.5;
      b.lk = lam_tot(fl, S_r) * kr.Ktau;
      const double Q = tpfa_flux(k.d_node, a, b);
      FluxFn law{fl, Q, slit_permeability(k.d_node) * drho * dot(g, el.tau) * k.d_node};
      const double gn = godunov_flux(law, S_if, S_r);
      const double h = geometric_flux(k.d_new * cfg.phi_frac * S_if,
                                      kr.d_new * cfg.phi_frac * S_r, el.slide_b);
      R[static_cast<std::size_t>(map_.s_iface(j))] += dt_ * (gn + h);
      R[static_cast<std::size_t>(map_.s_iface(r))] -= dt_ * (gn + h);
      R[static_cast<std::size_t>(map_.p_iface(j))] += Q;
      R[static_cast<std::size_t>(map_.p_iface(r))] -= Q;
    }
  }

  if (pin_pressure_ && map_.n_cells > 0)
    R[static_cast<std::size_t>(map_.p_bulk(0))] = S_at(map_.p_bulk(0));
}

void StepSystem::build_sparsity() {
  cols_.assign(static_cast<std::size_t>(map_.size()), {});
  auto couple = [&](std::initializer_list<int> dofs) {
    for (int col : dofs)
      for (int row : dofs) cols_[static_cast<std::size_t>(col)].push_back(row);
  };
  for (int c = 0; c < map_.n_cells; ++c) couple({map_.s_bulk(c), map_.p_bulk(c)});
  for (const auto& f : geo_->facets) {
    if (f.iface_elem >= 0 || f.cell_out < 0) continue;
    couple({map_.s_bulk(f.cell_in), map_.p_bulk(f.cell_in), map_.s_bulk(f.cell_out),
            map_.p_bulk(f.cell_out)});
  }
  for (int j = 0; j < map_.n_iface; ++j) {
    const auto& el = geo_->iface[static_cast<std::size_t>(j)];
    const int cp = geo_->facets[static_cast<std::size_t>(el.facet_plus)].cell_in;
    const int cm = geo_->facets[static_cast<std::size_t>(el.facet_minus)].cell_in;
    couple({map_.s_bulk(cp), map_.p_bulk(cp), map_.s_bulk(cm), map_.p_bulk(cm),
            map_.s_iface(j), map_.p_iface(j)});
    if (el.right >= 0)
      couple({map_.s_iface(j), map_.p_iface(j), map_.s_iface(el.right),
              map_.p_iface(el.right)});
  }
  for (auto& rows : cols_) {
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  }
}

NewtonReport newton_solve(const StepSystem& sys, std::vector<double>& U,
                          const NewtonOptions& opt) {
  const int N = sys.size();
  NewtonReport rep;
  std::vector<double> R0;
  sys.residual(U, R0);
  double raw = 0.0;
  for (double r : R0) raw = std::max(raw, std::abs(r));
  if (raw <= opt.atol) {
    rep.converged = true;
    rep.residual = raw;
    return rep;
  }

  // greedy distance-2 coloring of the unknowns so one residual sweep probes
  // a whole color
  const auto& cols = sys.sparsity();
  std::vector<std::vector<int>> rows_to_cols(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j)
    for (int r : cols[static_cast<std::size_t>(j)])
      rows_to_cols[static_cast<std::size_t>(r)].push_back(j);
  std::vector<int> color(static_cast<std::size_t>(N), -1);
  std::vector<int> mark;
  int ncolors = 0;
  for (int j = 0; j < N; ++j) {
    for (int r : cols[static_cast<std::size_t>(j)])
      for (int k : rows_to_cols[static_cast<std::size_t>(r)])
        if (color[static_cast<std::size_t>(k)] >= 0)
          mark[static_cast<std::size_t>(color[static_cast<std::size_t>(k)])] = j;
    int c = 0;
    while (c < ncolors && mark[static_cast<std::size_t>(c)] == j) ++c;
    if (c == ncolors) {
      ++ncolors;
      mark.push_back(-1);
    }
    color[static_cast<std::size_t>(j)] = c;
  }
  std::vector<std::vector<int>> members(static_cast<std::size_t>(ncolors));
  for (int j = 0; j < N; ++j)
    members[static_cast<std::size_t>(color[static_cast<std::size_t>(j)])].push_back(j);

  // central differences: truncation ~ eps^(2/3), good enough that an exactly
  // linear system converges on the first update
  const double steph = std::cbrt(std::numeric_limits<double>::epsilon());
  Eigen::SparseMatrix<double> J(N, N);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> Up, Um, Rp, Rm, rscale(static_cast<std::size_t>(N)),
      cscale(static_cast<std::size_t>(N));
  const bool trace = std::getenv("FVMM_NEWTON_TRACE") != nullptr;

  auto scaled_norm = [&](const std::vector<double>& R) {
    double m = 0.0;
    for (int i = 0; i < N; ++i)
      m = std::max(m, std::abs(R[static_cast<std::size_t>(i)]) *
                          rscale[static_cast<std::size_t>(i)]);
    return m;
  };

  double theta0 = -1.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    // Jacobian by forward differences, one sweep per color
    double pscale = 1.0;
    const auto& mp = sys.map();
    for (int c = 0; c < mp.n_cells; ++c)
      pscale = std::max(pscale, std::abs(U[static_cast<std::size_t>(mp.p_bulk(c))]));
    for (int j = 0; j < mp.n_iface; ++j)
      pscale = std::max(pscale, std::abs(U[static_cast<std::size_t>(mp.p_iface(j))]));
    // both blocks interleave (S, P) from even offsets, so odd means pressure
    auto typical = [&](int j) { return j % 2 == 1 ? pscale : 1.0; };

    trips.clear();
    for (const auto& group : members) {
      Up = U;
      Um = U;
      for (int j : group) {
        const double h =
            steph * std::max(std::abs(U[static_cast<std::size_t>(j)]), typical(j));
        Up[static_cast<std::size_t>(j)] += h;
        Um[static_cast<std::size_t>(j)] -= h;
      }
      sys.residual(Up, Rp);
      sys.residual(Um, Rm);
      for (int j : group) {
        const double h2 = Up[static_cast<std::size_t>(j)] - Um[static_cast<std::size_t>(j)];
        for (int r : cols[static_cast<std::size_t>(j)])
          trips.emplace_back(r, j,
                             (Rp[static_cast<std::size_t>(r)] -
                              Rm[static_cast<std::size_t>(r)]) /
                                 h2);
      }
    }
    J.setFromTriplets(trips.begin(), trips.end());

    // two-sided equilibration
    std::fill(rscale.begin(), rscale.end(), 0.0);
    for (int k = 0; k < J.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator i(J, k); i; ++i)
        rscale[static_cast<std::size_t>(i.row())] =
            std::max(rscale[static_cast<std::size_t>(i.row())], std::abs(i.value()));
    for (auto& s : rscale) s = s > 0.0 ? 1.0 / s : 1.0;
    std::fill(cscale.begin(), cscale.end(), 0.0);
    for (int k = 0; k < J.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator i(J, k); i; ++i)
        cscale[static_cast<std::size_t>(i.col())] =
            std::max(cscale[static_cast<std::size_t>(i.col())],
                     std::abs(i.value()) * rscale[static_cast<std::size_t>(i.row())]);
    for (auto& s : cscale) s = s > 0.0 ? 1.0 / s : 1.0;
    for (int k = 0; k < J.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator i(J, k); i; ++i)
        i.valueRef() *= rscale[static_cast<std::size_t>(i.row())] *
                        cscale[static_cast<std::size_t>(i.col())];

    const double theta = scaled_norm(R0);
    if (theta0 < 0.0) theta0 = theta;
    double raw_now = 0.0;
    for (double r : R0) raw_now = std::max(raw_now, std::abs(r));
    if (trace) {
      std::fprintf(stderr, "newton it=%d theta=%.3e raw=%.3e theta0=%.3e\n", it,
                   theta, raw_now, theta0);
      int worst_r = 0;
      double worst_v = 0.0;
      for (int i = 0; i < N; ++i) {
        const double v = std::abs(R0[static_cast<std::size_t>(i)]) *
                         rscale[static_cast<std::size_t>(i)];
        if (v > worst_v) { worst_v = v; worst_r = i; }
      }
      const bool bulk = worst_r < 2 * mp.n_cells;
      std::fprintf(stderr, "  worst row=%d %s-%s idx=%d raw=%.3e scaled=%.3e\n",
                   worst_r, worst_r % 2 == 0 ? "s" : "p", bulk ? "bulk" : "iface",
                   bulk ? worst_r / 2 : (worst_r - 2 * mp.n_cells) / 2,
                   R0[static_cast<std::size_t>(worst_r)], worst_v);
      int raw_r = 0;
      double raw_v = 0.0;
      for (int i = 0; i < N; ++i) {
        const double v = std::abs(R0[static_cast<std::size_t>(i)]);
        if (v > raw_v) { raw_v = v; raw_r = i; }
      }
      const bool rbulk = raw_r < 2 * mp.n_cells;
      std::fprintf(stderr, "  rawmax row=%d %s-%s idx=%d raw=%.3e rscale=%.3e\n",
                   raw_r, raw_r % 2 == 0 ? "s" : "p", rbulk ? "bulk" : "iface",
                   rbulk ? raw_r / 2 : (raw_r - 2 * mp.n_cells) / 2, raw_v,
                   rscale[static_cast<std::size_t>(raw_r)]);
    }
    if (raw_now <= opt.atol || theta <= opt.atol || theta <= opt.rtol * theta0) {
      rep.converged = true;
      rep.iterations = it - 1;
      rep.residual = theta;
      return rep;
    }

    if (!analyzed) {
      lu.analyzePattern(J);
      analyzed = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success) {
      rep.iterations = it - 1;
      rep.residual = theta;
      return rep;
    }
    Eigen::VectorXd rhs(N);
    for (int i = 0; i < N; ++i)
      rhs[i] = -R0[static_cast<std::size_t>(i)] * rscale[static_cast<std::size_t>(i)];
    Eigen::VectorXd y = lu.solve(rhs);

    // damped update, halving on residual growth in the equilibrated norm
    double alpha = 1.0;
    for (int half = 0;; ++half) {
      Up = U;
      for (int i = 0; i < N; ++i)
        Up[static_cast<std::size_t>(i)] +=
            alpha * y[i] * cscale[static_cast<std::size_t>(i)];
      sys.residual(Up, Rp);
      if (scaled_norm(Rp) < theta || half >= opt.max_halvings) break;
      alpha *= 0.5;
    }
    if (trace)
      std::fprintf(stderr, "newton it=%d alpha=%.3e theta_next=%.3e\n", it, alpha,
                   scaled_norm(Rp));
    U.swap(Up);
    R0.swap(Rp);
    rep.iterations = it;
    rep.residual = scaled_norm(R0);
  }

  rep.converged = rep.residual <= opt.atol || rep.residual <= opt.rtol * theta0;
  return rep;
}

double wetting_mass(const Triangulation& T, const MeshState& state,
                    const CaseConfig& cfg, double t) {
  double m = 0.0;
  for (int tr : T.alive_triangles()) {
    const auto& tri = T.triangle(tr);
    const double a = triangle_area(T.vertex(tri.v[0]).pos, T.vertex(tri.v[1]).pos,
                                   T.vertex(tri.v[2]).pos);
    m += cfg.porosity_of(tri.label) * state.S[static_cast<std::size_t>(tr)] * a;
  }
  for (const auto& [key, S] : state.S_if) {
    const Vec2 a = T.vertex(key.first).pos;
    const Vec2 b = T.vertex(key.second).pos;
    const Vec2 mid = (a + b) * 0.5;
    m += cfg.phi_frac * S * cfg.frac.aperture_of(mid, t) * norm(b - a);
  }
  return m;
}

double dgcl_max_residual(const MeshGeometry& geo) {
  std::vector<double> sum(geo.cells.size(), 0.0);
  for (const auto& f : geo.facets) {
    sum[static_cast<std::size_t>(f.cell_in)] += f.swept;
    if (f.cell_out >= 0) sum[static_cast<std::size_t>(f.cell_out)] -= f.swept;
  }
  double worst = 0.0;
  for (std::size_t c = 0; c < geo.cells.size(); ++c)
    worst = std::max(worst,
                     std::abs(geo.cells[c].area_new - geo.cells[c].area_old - sum[c]));
  for (const auto& el : geo.iface)
    worst = std::max(worst, std::abs(el.len_new - el.len_old -
                                     geo.dt * (el.slide_b - el.slide_a)));
  return worst;
}

MeshGeometry stage_step(Triangulation& T, MeshState& state, const CaseConfig& cfg,
                        double t, double dt, RemeshReport* remesh_report) {
  assign_velocities(T, cfg, t, dt);

  RemeshOptions ro;
  ro.size = mesh_size_field(cfg, t);
  ro.dt = dt;
  ro.phi_of_label = [&cfg](int label) { return cfg.porosity_of(label); };
  ro.phi_iface = cfg.phi_frac;
  ro.aperture = [&cfg, t](const Vec2& x) { return cfg.frac.aperture_of(x, t); };
  ro.reassign_velocities = [&cfg, t, dt](Triangulation& TT) {
    assign_velocities(TT, cfg, t, dt);
  };
  if (cfg.mode == RunMode::full_dimensional)
    ro.subdomain_project = [&cfg, t](const Vec2& x) {
      return project_to_rim(cfg.frac, x, t);
    };
  const RemeshReport rr = remesh(T, state, ro);
  if (remesh_report) *remesh_report = rr;
  if (!rr.motion_valid)
    throw GeometryError("mesh motion folds a cell within the step");
  return build_geometry(T, dt);
}

namespace {

void step_recursive(Triangulation& T, MeshState& state, const CaseConfig& cfg,
                    double t, double dt, int depth, const StepOptions& opt,
                    StepReport& rep) {
  bool accepted = false;
  {
    try {
      RemeshReport rr;
      const MeshGeometry geo = stage_step(T, state, cfg, t, dt, &rr);
      rep.remesh_rounds += rr.rounds;
      rep.remesh_inserted += rr.inserted;
      rep.remesh_removed += rr.removed;
      StepSystem sys(geo, cfg, state, t);
      std::vector<double> U = sys.gather(state);
      const NewtonReport nr = newton_solve(sys, U, opt.newton);
      if (nr.converged) {
        sys.scatter(U, state);
        for (int v = 0; v < T.vertex_count(); ++v) {
          auto& vd = T.vertex(v);
          if (vd.alive) vd.pos = vd.pos + vd.vel * dt;
        }
        rep.substeps += 1;
        rep.newton_iterations += nr.iterations;
        rep.residual = std::max(rep.residual, nr.residual);
        rep.dgcl_max = std::max(rep.dgcl_max, dgcl_max_residual(geo));
        const StepSystem::Audit a = sys.audit(U);
        rep.injected += a.injected_w;
        rep.boundary_outflow += a.boundary_w_out;
        accepted = true;
      }
    } catch (const GeometryError& e) {
      accepted = false;  // degenerate target geometry; retry on a shorter step
      if (std::getenv("FVMM_NEWTON_TRACE"))
        std::fprintf(stderr, "step rejected (dt=%.3e): %s\n", dt, e.what());
    }
  }
  if (accepted) return;

  if (depth >= opt.max_dt_halvings)
    throw SolverError("time step rejected after " + std::to_string(depth) +
                      " halvings at t = " + std::to_string(t));
  step_recursive(T, state, cfg, t, dt * 0.5, depth + 1, opt, rep);
  step_recursive(T, state, cfg, t + dt * 0.5, dt * 0.5, depth + 1, opt, rep);
}

}  // namespace

StepReport advance(Triangulation& T, MeshState& state, const CaseConfig& cfg,
                   double t, double dt, const StepOptions& opt) {
  if (!(dt > 0.0)) throw ConfigError("advance needs a positive time step");
  StepReport rep;
  rep.t0 = t;
  rep.t1 = t + dt;
  rep.mass_before = wetting_mass(T, state, cfg, t);
  step_recursive(T, state, cfg, t, dt, 0, opt, rep);
  rep.mass_after = wetting_mass(T, state, cfg, t + dt);
  return rep;
}

}  // namespace fvmm
