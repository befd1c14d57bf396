#pragma once

// The modified Hamiltonian h_m and the action functional
//   F_m(z) = (1/2)(||z+||^2 - ||z-||^2)_{1/2} - int_0^1 h_m(z(t)) dt.
//
// h_m is assembled from the level parameter rho of H o Phi_m inside the
// chart, the ||y||-based hypersurfaces outside (blended over a tangential
// collar), the step profile f on the level band, and the asymptotically
// quadratic tail g in the fibre directions:
//
//   h_m(z) = f(rho(z))     for ||y|| <  r      (covers the regions B, S_rho,
//                                               and the inner part of A)
//          = g(||y||)      for ||y|| >= r.
//
// With f saturating at 0 / b outside (-eps, eps) this reproduces the
// four-case definition, and both construction inequalities
//   -b + (q/2) pi ||y||^2 <= h <= (q/2) pi ||y||^2 + b        (u1)
//   ||grad h(z)|| <= c1 ||z||                                  (u2)
// hold by construction; verify_bounds samples them.

#include "orbitlab/loops.hpp"

namespace orbitlab {

struct ProfileOptions {
  double r_factor = 1.5;
  double b_factor = 0.75;
  double collar_width = 0.1;  // in units of gamma
  int base_grid = 12;         // per axis, torus bases
  int ray_dirs = 32;
};

struct CutoffProfile {
  double epsilon = 0.0;
  double q = 3.0;
  double gamma = 0.0;
  double r = 0.0;
  double b = 0.0;
  double s_quad = 0.0;   // guaranteed pure-quadratic radius (= 2r)
  double s_join = 0.0;   // actual radius where g meets the parabola
  double delta = 0.0;    // ramp fraction of (s_quad - r)
  double collar_x = std::numeric_limits<double>::infinity();
  double collar_w = 1.0;
  ProfileOptions options;

  // f: 0 on (-inf,-eps], b on [eps,inf), strictly increasing between, C^2.
  double f(double rho) const {
    return b * smoothstep5((rho + epsilon) / (2.0 * epsilon));
  }
  double f_deriv(double rho) const {
    return b * smoothstep5_deriv((rho + epsilon) / (2.0 * epsilon)) /
           (2.0 * epsilon);
  }

  // ramp of g': g'(s) = q pi s w(s) on (r, s_join), then exactly q pi s.
  double ramp(double s) const {
    double len = delta * (s_quad - r);
    return smoothstep5((s - r) / len);
  }

  double g(double s) const {
    if (s <= r) return b;
    if (s >= s_join) return 0.5 * q * pi * s * s;
    const auto& rule = gauss01(20);
    double acc = 0.0;
    for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
      double t = r + (s - r) * rule.nodes[a];
      acc += rule.weights[a] * t * ramp(t);
    }
    return b + q * pi * (s - r) * acc;
  }

  double g_deriv(double s) const {
    if (s <= r) return 0.0;
    if (s >= s_join) return q * pi * s;
    return q * pi * s * ramp(s);
  }

  bool q_admissible(int n, int l, std::string* why = nullptr) const {
    double half = q / 2.0;
    if (std::abs(half - std::round(half)) < 1e-9) {
      if (why) *why = "q must not be an even integer";
      return false;
    }
    double bound = std::max(2.0 * l / double(n - l), 2.0);  // c = 1 section
    if (!(q > bound)) {
      if (why)
        *why = "q must exceed max(2l/(n-l), 2/c) = " + std::to_string(bound);
      return false;
    }
    return true;
  }
};

struct ModifiedHamiltonian {
  const ModelSystem* sys = nullptr;
  TangentFrame frame;
  DarbouxChart chart;
  CutoffProfile profile;
  bool quadratic_only = false;  // diagnostic mode: h = (q/2) pi ||y||^2

  int dim() const { return frame.dim(); }
  int tdim() const { return frame.base_dim(); }
  int ndim() const { return frame.normal_dim(); }

  // H o Phi_m in combined coordinates and its gradient.
  double level_H(const VectorXd& z) const {
    return sys->hamiltonian(chart.map(frame.combined * z));
  }
  VectorXd grad_level_H(const VectorXd& z) const {
    VectorXd w = frame.combined * z;
    MatrixXd D = chart.differential(w);
    return frame.combined.transpose() *
           (D.transpose() * sys->grad_h(chart.map(w)));
  }

  double rho_in(const VectorXd& z) const {
    double e2 = profile.epsilon * profile.epsilon;
    return (level_H(z) - e2) * 4.0 / e2;
  }

  double chi(double xn) const {
    return smoothstep5((xn - profile.collar_x) / profile.collar_w);
  }

  double rho_hat(const VectorXd& z) const {
    double e2 = profile.epsilon * profile.epsilon;
    if (tdim() == 0) return rho_in(z);
    double xn = z.head(tdim()).norm();
    double c = chi(xn);
    double out = c > 0.0 ? (z.tail(ndim()).norm() - e2) * 4.0 / e2 : 0.0;
    double in = c < 1.0 ? rho_in(z) : 0.0;
    return (1.0 - c) * in + c * out;
  }

  double value(const VectorXd& z) const {
    double yn = z.tail(ndim()).norm();
    if (quadratic_only) return 0.5 * profile.q * pi * yn * yn;
    if (yn >= profile.r) return profile.g(yn);
    return profile.f(rho_hat(z));
  }

  VectorXd gradient(const VectorXd& z) const {
    const int nd = ndim(), td = tdim();
    VectorXd g = VectorXd::Zero(z.size());
    VectorXd y = z.tail(nd);
    double yn = y.norm();
    if (quadratic_only) {
      g.tail(nd) = profile.q * pi * y;
      return g;
    }
    if (yn >= profile.r) {
      if (yn > 0.0) g.tail(nd) = (profile.g_deriv(yn) / yn) * y;
      return g;
    }
    double fp = profile.f_deriv(rho_hat(z));
    if (fp == 0.0) return g;

    double e2 = profile.epsilon * profile.epsilon;
    if (td == 0) return VectorXd(fp * 4.0 / e2 * grad_level_H(z));

    double xn = z.head(td).norm();
    double c = chi(xn);
    VectorXd grad_rho = VectorXd::Zero(z.size());
    double in = 0.0, out = 0.0;
    if (c < 1.0) {
      in = rho_in(z);
      grad_rho += (1.0 - c) * 4.0 / e2 * grad_level_H(z);
    }
    if (c > 0.0) {
      out = (yn - e2) * 4.0 / e2;
      if (yn > 0.0) grad_rho.tail(nd) += (c * 4.0 / (e2 * yn)) * y;
    }
    double cp = smoothstep5_deriv((xn - profile.collar_x) / profile.collar_w) /
                profile.collar_w;
    if (cp != 0.0 && xn > 0.0)
      grad_rho.head(td) += (cp * (out - in) / xn) * z.head(td);
    return VectorXd(fp * grad_rho);
  }
};

namespace detail {

inline std::vector<VectorXd> base_grid_points(const ModelSystem& sys,
                                              int per_axis) {
  std::vector<VectorXd> pts;
  if (sys.base_kind == ModelSystem::BaseKind::Point) {
    pts.emplace_back();
    return pts;
  }
  for (int i = 0; i < per_axis; ++i)
    for (int j = 0; j < per_axis; ++j) {
      VectorXd m(2);
      m << two_pi * i / per_axis, two_pi * j / per_axis;
      pts.push_back(m);
    }
  return pts;
}

// Largest ||y|| on the outer level hypersurface S_{1,m} along a fibre ray.
inline double ray_radius(const ModelSystem& sys, const TangentFrame& fr,
                         const DarbouxChart& ch, const VectorXd& dir,
                         double target) {
  const int dim = fr.dim(), nd = fr.normal_dim();
  auto Hc = [&](double s) {
    VectorXd z = VectorXd::Zero(dim);
    z.tail(nd) = s * dir;
    return sys.hamiltonian(ch.map(fr.combined * z));
  };
  double hi = 1e-3;
  const double cap = 0.8 * ch.chart_radius;
  while (Hc(hi) < target) {
    hi *= 2.0;
    if (hi > cap)
      throw ChartEscapeError(
          "build_profile: level set escapes the chart (epsilon too large)");
  }
  double lo = hi / 2.0;
  if (hi <= 1e-3) lo = 0.0;
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    (Hc(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Global profile: gamma maximized over a sampled base grid (and normal ray
// directions), then r = r_factor*gamma, b = b_factor*q*pi*r^2, the f/g
// shapes, and the collar placement for the tangential extension.
inline CutoffProfile build_profile(const ModelSystem& sys, double eps, double q,
                                   const ProfileOptions& opt = {}) {
  CutoffProfile prof;
  prof.epsilon = eps;
  prof.q = q;
  prof.options = opt;
  std::string why;
  if (eps <= 0.0 || eps >= 1.0)
    throw ConfigError("build_profile: epsilon must lie in (0,1)");
  if (!prof.q_admissible(sys.n, sys.l, &why))
    throw ConfigError("build_profile: " + why);
  if (!(opt.r_factor > 1.0 && opt.r_factor < 2.0))
    throw ConfigError("build_profile: r_factor must lie in (1,2)");
  if (!(opt.b_factor > 0.5 && opt.b_factor < 1.0))
    throw ConfigError("build_profile: b_factor must lie in (0.5,1)");

  auto grid = detail::base_grid_points(sys, opt.base_grid);
  const double target = 1.25 * eps * eps;
  const int nd = sys.normal_dim();
  double gamma = 0.0;
  double c4 = 0.0;
  for (const auto& m : grid) {
    TangentFrame fr = build_frame(sys, m);
    DarbouxChart ch = darboux_chart(sys, m);
    for (int d = 0; d < opt.ray_dirs; ++d) {
      VectorXd dir;
      if (d < nd) {
        dir = VectorXd::Unit(nd, d);
      } else {
        dir = halton_ball_point(std::size_t(d), nd);
        if (dir.norm() < 1e-9) continue;
        dir.normalize();
      }
      gamma = std::max(gamma, detail::ray_radius(sys, fr, ch, dir, target));
    }
    if (sys.base_dim() > 0) {
      // quartic bound on H(Phi(x,0)) used to place the collar
      const double s_ref = 0.3 * ch.chart_radius;
      for (int d = 0; d < 8; ++d) {
        double ang = two_pi * d / 8.0;
        VectorXd z = VectorXd::Zero(fr.dim());
        z[0] = s_ref * std::cos(ang);
        z[1] = s_ref * std::sin(ang);
        double hval = sys.hamiltonian(ch.map(fr.combined * z));
        c4 = std::max(c4, hval / std::pow(s_ref, 4));
      }
    }
  }
  prof.gamma = gamma;
  prof.r = opt.r_factor * gamma;
  prof.b = opt.b_factor * q * pi * prof.r * prof.r;
  prof.s_quad = 2.0 * prof.r;
  prof.collar_w = std::max(opt.collar_width * gamma, 1e-12);
  if (sys.base_dim() > 0) {
    double cap = 0.6 * sys.chart_radius;
    double xc = cap;
    if (c4 > 1e-30)
      xc = std::min(cap, 0.8 * std::pow(0.25 * 0.75 * eps * eps / c4, 0.25));
    prof.collar_x = xc;
  }

  // parameter window (paper's construction region)
  if (!(prof.gamma < prof.r && prof.r < 2.0 * prof.gamma))
    throw ConfigError("build_profile: gamma < r < 2 gamma violated");
  if (!(0.5 * q * pi * prof.r * prof.r < prof.b &&
        prof.b < q * pi * prof.r * prof.r))
    throw ConfigError("build_profile: (q/2) pi r^2 < b < q pi r^2 violated");

  // Fix the g-tail ramp: choose delta so that g rides the parabola from
  // s_join = r + delta (s_quad - r) onward. F(delta) changes sign on (0,1).
  auto mass_defect = [&](double delta) {
    double len = delta * (prof.s_quad - prof.r);
    double s_join = prof.r + len;
    const auto& rule = gauss01(32);
    double acc = 0.0;
    for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
      double t = prof.r + len * rule.nodes[a];
      acc += rule.weights[a] * t * smoothstep5(rule.nodes[a]);
    }
    double integral = len * acc;
    double needed = 0.5 * s_join * s_join - prof.b / (prof.q * pi);
    return integral - needed;
  };
  double lo = 1e-6, hi = 1.0;
  if (!(mass_defect(lo) > 0.0 && mass_defect(hi) < 0.0))
    throw ConfigError("build_profile: g-tail interpolation infeasible");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (mass_defect(mid) > 0.0 ? lo : hi) = mid;
  }
  prof.delta = 0.5 * (lo + hi);
  prof.s_join = prof.r + prof.delta * (prof.s_quad - prof.r);

  // construction checks on a fine grid
  double join_err =
      std::abs(prof.g(prof.s_join * (1.0 - 1e-9)) -
               0.5 * q * pi * prof.s_join * prof.s_join);
  if (join_err > 1e-8 * std::max(1.0, prof.b))
    throw ConfigError("build_profile: g fails to meet the quadratic tail");
  for (int i = 1; i <= 1000; ++i) {
    double s = prof.r + (prof.s_quad - prof.r) * i / 1000.0;
    double gs = prof.g(s), gp = prof.g_deriv(s);
    if (gs < 0.5 * q * pi * s * s - 1e-9 * std::max(1.0, gs))
      throw ConfigError("build_profile: g >= (q/2) pi s^2 violated");
    if (gp < 0.0 || gp > q * pi * s * (1.0 + 1e-12))
      throw ConfigError("build_profile: 0 < g' <= q pi s violated");
  }
  return prof;
}

inline ModifiedHamiltonian make_modified(const ModelSystem& sys,
                                         const CutoffProfile& prof,
                                         const VectorXd& m) {
  ModifiedHamiltonian hm;
  hm.sys = &sys;
  hm.frame = build_frame(sys, m);
  hm.chart = darboux_chart(sys, m);
  hm.profile = prof;
  return hm;
}

inline ModifiedHamiltonian make_quadratic_tail(const ModelSystem& sys, double q,
                                               const VectorXd& m) {
  ModifiedHamiltonian hm;
  hm.sys = &sys;
  hm.frame = build_frame(sys, m);
  hm.chart = darboux_chart(sys, m);
  hm.profile.q = q;
  hm.profile.epsilon = 0.1;
  hm.quadratic_only = true;
  return hm;
}

// pi sum_k k |z_k|^2 = (1/2)(||z+||^2 - ||z-||^2)_{1/2}
inline double action_quadratic_part(const FourierLoop& z) {
  double acc = 0.0;
  for (int k = 1; k <= z.K; ++k)
    acc += k * (z.coeffs.col(z.col(k)).squaredNorm() -
                z.coeffs.col(z.col(-k)).squaredNorm());
  return pi * acc;
}

inline double eval_action(const ModifiedHamiltonian& hm, const FourierLoop& z,
                          const LoopGrid& grid) {
  if ((z.m - hm.frame.m).norm() > 1e-12)
    throw std::invalid_argument("eval_action: base-point mismatch");
  MatrixXd samples = synthesize(z, grid);
  double hsum = 0.0;
  for (int j = 0; j < grid.Nt; ++j) hsum += hm.value(samples.col(j));
  return action_quadratic_part(z) - hsum / grid.Nt;
}

// grad F = (z+ - z-) - j* grad h(z); j* divides coefficient k != 0 by
// 2 pi |k| and zeroes the tangential mean (the L^2-to-H^{1/2} adjoint).
inline FourierLoop grad_action_fibre(const ModifiedHamiltonian& hm,
                                     const FourierLoop& z, const LoopGrid& grid,
                                     double* value = nullptr) {
  if ((z.m - hm.frame.m).norm() > 1e-12)
    throw std::invalid_argument("grad_action_fibre: base-point mismatch");
  MatrixXd samples = synthesize(z, grid);
  MatrixXd grads(z.dim(), grid.Nt);
  double hsum = 0.0;
  for (int j = 0; j < grid.Nt; ++j) {
    if (value) hsum += hm.value(samples.col(j));
    grads.col(j) = hm.gradient(samples.col(j));
  }
  if (value) *value = action_quadratic_part(z) - hsum / grid.Nt;

  FourierLoop gh = fit(grads, grid, z.m, z.n, z.l);
  FourierLoop out = FourierLoop::zero(z.m, z.K, z.n, z.l);
  out.coeffs.col(out.col(0)) = -gh.coeffs.col(gh.col(0));
  for (int i = 0; i < z.tdim(); ++i) out.coeffs(i, out.col(0)) = 0.0;
  for (int k = 1; k <= z.K; ++k) {
    out.coeffs.col(out.col(k)) =
        z.coeffs.col(z.col(k)) - gh.coeffs.col(gh.col(k)) / (two_pi * k);
    out.coeffs.col(out.col(-k)) =
        -z.coeffs.col(z.col(-k)) - gh.coeffs.col(gh.col(-k)) / (two_pi * k);
  }
  return out;
}

// Central differences of F over the base coordinates (4th-order stencil,
// step 1e-4 of the torus period), transporting the coefficient array in the
// globally trivialized frame family.
inline VectorXd grad_action_base(const ModelSystem& sys,
                                 const CutoffProfile& prof, const VectorXd& m,
                                 const FourierLoop& z, const LoopGrid& grid,
                                 double step = 1e-4 * two_pi) {
  const int td = sys.base_dim();
  VectorXd g(td);
  auto F_at = [&](const VectorXd& ms) {
    FourierLoop zs = z;
    zs.m = ms;
    return eval_action(make_modified(sys, prof, ms), zs, grid);
  };
  for (int i = 0; i < td; ++i) {
    VectorXd m1 = m, m2 = m, m3 = m, m4 = m;
    m1[i] -= 2.0 * step;
    m2[i] -= step;
    m3[i] += step;
    m4[i] += 2.0 * step;
    g[i] = (F_at(m1) - 8.0 * F_at(m2) + 8.0 * F_at(m3) - F_at(m4)) /
           (12.0 * step);
  }
  return g;
}

struct BoundsReport {
  bool u1_ok = false;
  bool u2_ok = false;
  double c1 = 0.0;                  // measured sup ||grad h|| / ||z||
  double tangential_grad_max = 0.0; // measured sup ||grad_T h||
  int samples = 0;
};

inline BoundsReport verify_bounds(const ModifiedHamiltonian& hm,
                                  int sample_count, std::uint64_t seed = 2024) {
  if (sample_count < 1000)
    throw ConfigError("verify_bounds: need at least 1000 samples");
  BoundsReport rep;
  rep.samples = sample_count;
  rep.u1_ok = true;
  rep.u2_ok = true;
  SplitMix64 rng(seed);
  const double R = 4.0 * hm.profile.s_quad;
  const double q = hm.profile.q, b = hm.profile.b;
  const int dim = hm.dim(), nd = hm.ndim(), td = hm.tdim();
  for (int i = 0; i < sample_count; ++i) {
    VectorXd z = rng.normal_vector(dim);
    z *= R * std::pow(rng.uniform(), 1.0 / dim) / z.norm();
    double yn2 = z.tail(nd).squaredNorm();
    double h = hm.value(z);
    double quad = 0.5 * q * pi * yn2;
    if (h < quad - b - 1e-9 || h > quad + b + 1e-9) rep.u1_ok = false;
    VectorXd gh = hm.gradient(z);
    if (!gh.allFinite()) rep.u2_ok = false;
    double zn = z.norm();
    if (zn > 1e-8) rep.c1 = std::max(rep.c1, gh.norm() / zn);
    if (td > 0)
      rep.tangential_grad_max =
          std::max(rep.tangential_grad_max, gh.head(td).norm());
  }
  if (!rep.u1_ok || !rep.u2_ok)
    throw VerificationError("verify_bounds: construction inequality violated");
  return rep;
}

}  // namespace orbitlab
