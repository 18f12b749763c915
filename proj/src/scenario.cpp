#include "fvmm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "fvmm/mesh_builder.hpp"

namespace fvmm {

namespace {
constexpr double kPi = 3.14159265358979323846;

// deterministic [-1,1] stream used to stagger rim samples; mirrored sample
// positions on the two slab sides build exact rectangles across the strip,
// and concyclic cell pairs have coincident circumcenters that the two-point
// flux cannot separate
double stagger(std::uint64_t i, std::uint64_t salt) {
  std::uint64_t z = i * 0x9e3779b97f4a7c15ULL + salt;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
}
}

double FractureSchedule::aperture_by_radius(double r, double t) const {
  const double q = r - half_length(t);
  const double arg = std::max(0.0, 1.0 - q * q);
  return width_factor(t) * std::sqrt(arg);
}

double FractureSchedule::aperture_at(const Vec2& x, double t) const {
  const Vec2 rel = x - center;
  const double off = std::abs(cross(tangent, rel));
  const double u = dot(rel, tangent);
  if (off > 1e-9 || std::abs(u) > half_length(t) + 1e-9)
    throw DomainError("aperture requested off the fracture segment");
  return aperture_by_radius(std::abs(u), t);
}

void CaseConfig::validate() const {
  if (!(h > 0.0)) throw ConfigError("mesh size must be positive");
  if (!(t_end >= 0.0)) throw ConfigError("end time must be nonnegative");
  if (S0 < 0.0 || S0 > 1.0 || S0_frac < 0.0 || S0_frac > 1.0)
    throw ConfigError("initial saturation outside [0,1]");
  for (double t : {0.0, t_end}) {
    if (!(frac.half_length(t) > 0.0))
      throw ConfigError("fracture half-length vanishes at t=" + std::to_string(t));
    if (!(frac.width_factor(t) > 0.0))
      throw ConfigError("fracture aperture vanishes at t=" + std::to_string(t));
  }
}

Vec2 project_to_rim(const FractureSchedule& fs, const Vec2& x, double t) {
  const double R = fs.half_length(t);
  const double u = std::clamp(dot(x - fs.center, fs.tangent), -R, R);
  const Vec2 base = fs.point_at(u);
  Vec2 e = x - base;
  const double en = norm(e);
  e = en < 1e-14 ? perp(fs.tangent) : e / en;
  // rho - d(base + rho e)/2 grows monotonically from -d(base)/2 < 0 and is
  // positive at rho = width_factor since d <= width_factor
  double lo = 0.0, hi = fs.width_factor(t);
  for (int it = 0; it < 100 && hi - lo > 1e-16; ++it) {
    const double m = 0.5 * (lo + hi);
    if (m - 0.5 * fs.aperture_of(base + e * m, t) < 0.0)
      lo = m;
    else
      hi = m;
  }
  return base + e * (0.5 * (lo + hi));
}

std::vector<Vec2> sample_rim(const FractureSchedule& fs, double t, double spacing) {
  const double R = fs.half_length(t);
  const Vec2 tau = fs.tangent;
  const Vec2 n_right = perp(tau);
  const Vec2 n_left = n_right * -1.0;

  std::vector<Vec2> pts;
  auto rim_point = [&](const Vec2& base, const Vec2& dir) {
    return project_to_rim(fs, base + dir * (1e-3 * fs.width_factor(t)), t);
  };

  // walk the right side tip-to-tip, round the far cap, return on the left
  // side and round the near cap; interior stays on the left: CCW
  const int m_side = std::max(2, static_cast<int>(std::ceil(2.0 * R / spacing)));
  const double du = 2.0 * R / m_side;
  auto side_u = [&](int i, std::uint64_t salt) {
    if (i == 0 || i == m_side) return static_cast<double>(i) * du;
    return i * du + 0.25 * du * stagger(static_cast<std::uint64_t>(i), salt);
  };
  for (int i = 0; i <= m_side; ++i)
    pts.push_back(rim_point(fs.point_at(-R + side_u(i, 0x726967687473ULL)), n_right));
  const double cap_r = 0.5 * fs.width_factor(t);
  const int m_cap = std::max(3, static_cast<int>(std::ceil(kPi * cap_r / spacing)));
  auto cap_th = [&](int i, std::uint64_t salt) {
    return (i + 0.25 * stagger(static_cast<std::uint64_t>(i), salt)) * kPi / m_cap;
  };
  for (int i = 1; i < m_cap; ++i) {
    const double th = -0.5 * kPi + cap_th(i, 0x706c7573ULL);
    pts.push_back(rim_point(fs.tip(+1, t), tau * std::cos(th) + n_left * std::sin(th)));
  }
  for (int i = 0; i <= m_side; ++i)
    pts.push_back(rim_point(fs.point_at(R - side_u(i, 0x6c656674ULL)), n_left));
  for (int i = 1; i < m_cap; ++i) {
    const double th = 0.5 * kPi + cap_th(i, 0x6d696e7573ULL);
    pts.push_back(rim_point(fs.tip(-1, t), tau * std::cos(th) + n_left * std::sin(th)));
  }
  return pts;
}

namespace {

void seed_case(CaseConfig& cfg, int case_id) {
  cfg.case_id = case_id;
  cfg.frac = FractureSchedule{};
  switch (case_id) {
    case 1:
      cfg.frac.d0 = 0.1;
      cfg.frac.v_prolong = 0.25;
      cfg.gravity = Vec2{0.0, 0.0};
      cfg.S0 = 1.0;
      cfg.S0_frac = 1.0;
      break;
    case 2:
      cfg.frac.d0 = 0.01;
      cfg.frac.v_prolong = 0.25;
      cfg.S0 = 0.0;
      cfg.S0_frac = 0.0;
      cfg.q_w = cfg.q_nw = 10.0;
      cfg.q_w_frac = cfg.q_nw_frac = 10.0;
      cfg.bc[2] = BoundaryCondition{BcKind::pressure, 0.0};
      break;
    case 3:
      cfg.frac.d0 = 0.01;
      cfg.frac.v_squeeze = 0.005;
      cfg.S0 = 0.0;
      cfg.S0_frac = 0.0;
      cfg.q_w = cfg.q_nw = 10.0;
      cfg.q_w_frac = cfg.q_nw_frac = 10.0;
      cfg.bc[2] = BoundaryCondition{BcKind::pressure, 0.0};
      break;
    default:
      throw ConfigError("unknown case id " + std::to_string(case_id));
  }
}

}  // namespace

std::function<double(const Vec2&)> mesh_size_field(const CaseConfig& cfg, double t) {
  const double h = cfg.h;
  if (cfg.mode == RunMode::reduced) return [h](const Vec2&) { return h; };
  const double hf = h / 4.0;
  const FractureSchedule fs = cfg.frac;
  const Vec2 a = fs.tip(-1, t), b = fs.tip(+1, t);
  const double band = 0.5 * fs.width_factor(t) + 2.0 * hf;
  return [=](const Vec2& x) {
    const double rho = point_segment_distance(x, a, b);
    return rho <= band ? hf : std::min(h, hf + (rho - band));
  };
}

CaseSetup build_case(int case_id, RunMode mode, double h) {
  CaseSetup out;
  CaseConfig& cfg = out.cfg;
  seed_case(cfg, case_id);
  cfg.mode = mode;
  cfg.h = h;
  cfg.tip_reach = 3.0 * h;
  cfg.validate();

  const FractureSchedule& fs = cfg.frac;
  MeshSpec ms;
  ms.size = mesh_size_field(cfg, 0.0);
  if (mode == RunMode::reduced) {
    MeshSpec::Chain chain;
    chain.kind = ConstraintKind::fracture;
    const int n =
        std::max(2, static_cast<int>(std::ceil(2.0 * fs.R0 / (0.75 * h))));
    for (int i = 0; i <= n; ++i)
      chain.pts.push_back(fs.point_at(-fs.R0 + 2.0 * fs.R0 * i / n));
    ms.chains.push_back(std::move(chain));
  } else {
    MeshSpec::Chain chain;
    chain.kind = ConstraintKind::subdomain_boundary;
    chain.closed = true;
    chain.pts = sample_rim(fs, 0.0, 0.75 * h / 4.0);
    ms.chains.push_back(std::move(chain));
    ms.subdomain_project = [fs](const Vec2& p) { return project_to_rim(fs, p, 0.0); };
  }

  out.mesh = build_mesh(ms);
  out.state.resize_cells(out.mesh.triangle_count());
  for (int tr : out.mesh.alive_triangles()) {
    out.state.S[static_cast<std::size_t>(tr)] = cfg.S0;
    out.state.P[static_cast<std::size_t>(tr)] = 0.0;
  }
  if (mode == RunMode::reduced) {
    for (int tr : out.mesh.alive_triangles()) {
      const auto& tri = out.mesh.triangle(tr);
      for (int e = 0; e < 3; ++e) {
        if (tri.ek[e] != ConstraintKind::fracture) continue;
        const auto k = MeshState::key(tri.v[(e + 1) % 3], tri.v[(e + 2) % 3]);
        out.state.S_if[k] = cfg.S0_frac;
        out.state.P_if[k] = 0.0;
      }
    }
  }
  return out;
}

void assign_velocities(Triangulation& T, const CaseConfig& cfg, double t, double dt) {
  const FractureSchedule& fs = cfg.frac;
  if (cfg.mode == RunMode::full_dimensional && !(dt > 0.0))
    throw ConfigError("slab boundary velocities need a positive step size");
  const Vec2 tip_vel_plus = fs.tangent * fs.v_prolong;
  const Vec2 tip_vel_minus = fs.tangent * -fs.v_prolong;
  const Vec2 tp = fs.tip(+1, t), tm = fs.tip(-1, t);
  const double reach = cfg.tip_reach;

  auto decay_field = [&](const Vec2& x) -> Vec2 {
    if (fs.v_prolong == 0.0 || reach <= 0.0) return Vec2{0.0, 0.0};
    const double dp = norm(x - tp), dm = norm(x - tm);
    if (dp < reach && dp <= dm) return tip_vel_plus * (1.0 - dp / reach);
    if (dm < reach) return tip_vel_minus * (1.0 - dm / reach);
    return Vec2{0.0, 0.0};
  };

  for (int v = 0; v < T.vertex_count(); ++v) {
    if (!T.vertex(v).alive) continue;
    const VertexClass cls = classify_vertex(T, v);
    const Vec2 x = T.vertex(v).pos;
    Vec2 vel{0.0, 0.0};
    if (cls.on_boundary) {
      // pinned
    } else if (cls.tip) {
      vel = dot(x - fs.center, fs.tangent) > 0.0 ? tip_vel_plus : tip_vel_minus;
    } else if (cls.on_subdomain) {
      const Vec2 target = project_to_rim(fs, x + decay_field(x) * dt, t + dt);
      vel = (target - x) / dt;
    } else if (cls.constrained_degree == 0) {
      vel = decay_field(x);
    }
    T.vertex(v).vel = vel;
  }
}

}  // namespace fvmm
