#pragma once

// Linking sets Sigma and Gamma, the negative H^{1/2}-gradient flow of F with
// enforced sup monotonicity, the minimax search c = inf_t sup_{psi^t(Sigma)} F
// with mountain-pass refinement of the sample path, Newton polish of
// captured candidates, and the spectral/Palais-Smale diagnostics.

#include <cstdio>
#include <deque>
#include <optional>

#include "orbitlab/action.hpp"

namespace orbitlab {

struct LinkingOptions {
  double alpha_request = 0.0;  // 0 = auto (tau^2/4, then halving)
  double tau_margin = 1.05;
  int gamma_samples = 48;
  int boundary_sphere = 48;
  int boundary_scount = 5;
  int boundary_ball = 48;
};

struct LinkingConfig {
  double tau = 0.0;
  double alpha = 0.0;
  double beta_floor = 0.0;
  double boundary_max_F = 0.0;
  double gamma_min_F = 0.0;
  std::string tau_branch;
  std::vector<FourierLoop> sigma_boundary;
  std::vector<FourierLoop> gamma_sample;
};

struct PSRecord {
  double t = 0.0;
  double sup = 0.0;
  double argmax_grad = 0.0;
  double argmax_znorm = 0.0;
  double argmax_diff = 0.0;  // step change of (z+ - z-) at the argmax
  double min_grad = 0.0;     // smallest gradient among active points
  double min_grad_znorm = 0.0;
  double dist_gamma = 0.0;   // closest front point to Gamma
  int front_size = 0;
};

struct CriticalCandidate {
  VectorXd m;
  FourierLoop z;
  double value = 0.0;
  double grad_norm = 0.0;
  double base_grad_norm = 0.0;
  double polish_residual = 0.0;
  double value_drift = 0.0;
  int newton_iters = 0;
  bool polished = false;
};

struct SearchOptions {
  long budget = 100000;
  int plateau_window = 50;
  double plateau_rtol = 1e-8;
  double tol_grad = 1e-9;
  double capture_threshold = 1e-2;
  double dt_init = 0.05;
  double dt_max = 0.5;
  int s_ray = 17;
  int mixed = 8;
  int front_cap = 160;
  double base_step = 1e-4 * two_pi;
  int min_sweeps = 0;  // keep flowing after capture (richer PS diagnostics)
  int verbose = 0;     // 1: per-sweep diagnostics on stderr
};

struct SearchResult {
  double c_estimate = 0.0;
  CriticalCandidate candidate;
  bool converged = false;
  long grad_evals = 0;
  std::vector<PSRecord> trace;
  double linking_proximity =
      std::numeric_limits<double>::infinity();  // min dist to Gamma while
                                                // sup > beta_floor
};

// ---------------------------------------------------------------------------
// spectral q-check

struct QCheckReport {
  double margin = 0.0;
  int nearest_k = 0;
  std::vector<double> spectrum;  // eigenvalues 2 pi k of u -> J du/dt
};

inline QCheckReport spectral_q_check(int K, double q) {
  double half = q / 2.0;
  if (std::abs(half - std::round(half)) < 1e-12)
    throw ConfigError(
        "spectral_q_check: q is an even integer; q pi lies in the spectrum "
        "{2 pi Z} of u -> J du/dt and the Palais-Smale property fails");
  QCheckReport rep;
  rep.margin = std::numeric_limits<double>::infinity();
  for (int k = -K; k <= K; ++k) {
    rep.spectrum.push_back(two_pi * k);
    double d = std::abs(q * pi - two_pi * k);
    if (d < rep.margin) {
      rep.margin = d;
      rep.nearest_k = k;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// linking sets

namespace detail {

// loop in the (k = -1, k = 0 normal) slice plus s e_N^+
inline FourierLoop sigma_point(const VectorXd& m, int K, int n, int l,
                               const VectorXd& cm1, const VectorXd& y0,
                               double s) {
  FourierLoop z = FourierLoop::zero(m, K, n, l);
  z.coeffs.col(z.col(-1)) = cm1;
  z.coeffs.col(z.col(0)).tail(2 * (n - l)) = y0;
  z.coeffs(2 * l, z.col(1)) += s;
  z.enforce_mean_zero();
  return z;
}

// scale (cm1, y0) so that ||x- + y- + y0||_{1/2} = rho
inline void scale_slice(VectorXd& cm1, VectorXd& y0, double rho) {
  double nrm = std::sqrt(two_pi * cm1.squaredNorm() + y0.squaredNorm());
  if (nrm < 1e-14) return;
  cm1 *= rho / nrm;
  y0 *= rho / nrm;
}

inline double dist_to_gamma(const FourierLoop& z, double alpha) {
  FourierLoop p = project(project(z, LoopPart::E_plus), LoopPart::E_N);
  double pn = h_half_norm(p);
  FourierLoop rest = z - p;
  double away = h_half_norm(rest);
  double radial = pn - std::sqrt(alpha);
  return std::sqrt(radial * radial + away * away);
}

}  // namespace detail

// tau from the paper's two sufficiency conditions, Gamma radius alpha shrunk
// until the measured floor min F|_Gamma >= alpha/4 > 0, boundary signs of
// Sigma verified on deterministic samples.
inline LinkingConfig choose_parameters(const ModelSystem& sys,
                                       const CutoffProfile& prof,
                                       const VectorXd& m, const LoopGrid& grid,
                                       const LinkingOptions& opt = {}) {
  LinkingConfig cfg;
  const double q = prof.q, b = prof.b;
  const double c = 1.0;  // int_0^1 |e_N^+(t)|^2 dt for the unitary section
  const double denom = 0.5 * q * pi * c - pi;
  if (denom <= 0.0)
    throw ConfigError("choose_parameters: q <= 2/c, linking sets unavailable");
  double need_flat = 2.0 * b;     // from (1/2) tau^2 >= b
  double need_mixed = b / denom;  // from tau^2 ((q/2) pi c - pi) >= b
  cfg.tau = opt.tau_margin * std::sqrt(std::max(need_flat, need_mixed));
  cfg.tau_branch =
      need_flat >= need_mixed ? "0.5 tau^2 >= b" : "tau^2 ((q/2) pi c - pi) >= b";

  const int n = sys.n, l = sys.l, K = grid.K;
  const int dim = 2 * n, ndim = 2 * (n - l);
  ModifiedHamiltonian hm = make_modified(sys, prof, m);

  // Gamma = {||y+||_{1/2}^2 = alpha} in E_N^+
  double alpha = cfg.tau * cfg.tau / 4.0;
  if (opt.alpha_request > 0.0) alpha = std::min(alpha, opt.alpha_request);
  const int mode_cap = std::min(K, 8);
  while (true) {
    if (alpha < 1e-8)
      throw ConfigError(
          "choose_parameters: alpha collapsed without F|_Gamma > 0; h_m is "
          "not flat near the zero section");
    cfg.gamma_sample.clear();
    cfg.gamma_sample.push_back(std::sqrt(alpha / two_pi) *
                               e_N_plus(m, K, n, l));  // intersection point
    for (int i = 0; i < opt.gamma_samples; ++i) {
      FourierLoop z = FourierLoop::zero(m, K, n, l);
      VectorXd dir = halton_ball_point(std::size_t(i + 1), mode_cap * ndim);
      for (int k = 1; k <= mode_cap; ++k)
        z.coeffs.col(z.col(k)).tail(ndim) = dir.segment((k - 1) * ndim, ndim);
      double nrm = h_half_norm(z);
      if (nrm < 1e-12) continue;
      z *= std::sqrt(alpha) / nrm;
      cfg.gamma_sample.push_back(z);
    }
    cfg.gamma_min_F = std::numeric_limits<double>::infinity();
    for (const auto& z : cfg.gamma_sample)
      cfg.gamma_min_F = std::min(cfg.gamma_min_F, eval_action(hm, z, grid));
    if (cfg.gamma_min_F >= alpha / 4.0) break;
    alpha *= 0.5;
  }
  cfg.alpha = alpha;
  cfg.beta_floor = cfg.gamma_min_F;

  // Sigma boundary: sigma_1 {s=0}, sigma_2 {s=tau}, sigma_3 {||.|| = tau}
  const double tau = cfg.tau;
  std::size_t hidx = 1000;
  auto slice_dir = [&](std::size_t i, VectorXd& cm1, VectorXd& y0) {
    VectorXd u = halton_ball_point(i, dim + ndim);
    cm1 = u.head(dim);
    y0 = u.tail(ndim);
  };
  for (int i = 0; i < opt.boundary_ball; ++i) {
    VectorXd cm1, y0;
    slice_dir(hidx++, cm1, y0);
    double rho = tau * std::pow(halton(std::size_t(i), 7), 1.0 / (dim + ndim));
    detail::scale_slice(cm1, y0, rho);
    cfg.sigma_boundary.push_back(detail::sigma_point(m, K, n, l, cm1, y0, tau));
    cfg.sigma_boundary.push_back(detail::sigma_point(m, K, n, l, cm1, y0, 0.0));
  }
  for (int i = 0; i < opt.boundary_sphere; ++i) {
    VectorXd cm1, y0;
    slice_dir(hidx++, cm1, y0);
    detail::scale_slice(cm1, y0, tau);
    for (int j = 0; j < opt.boundary_scount; ++j) {
      double s = tau * j / double(opt.boundary_scount - 1);
      cfg.sigma_boundary.push_back(detail::sigma_point(m, K, n, l, cm1, y0, s));
    }
  }
  cfg.boundary_max_F = -std::numeric_limits<double>::infinity();
  for (const auto& z : cfg.sigma_boundary)
    cfg.boundary_max_F = std::max(cfg.boundary_max_F, eval_action(hm, z, grid));
  if (cfg.boundary_max_F > 1e-9)
    throw VerificationError(
        "choose_parameters: F > 0 on the boundary of Sigma (linking sign "
        "violated), max = " +
        std::to_string(cfg.boundary_max_F));
  if (!(cfg.beta_floor > 0.0))
    throw VerificationError("choose_parameters: F|_Gamma not positive");
  return cfg;
}

// ---------------------------------------------------------------------------
// gradient flow

struct FrontPoint {
  VectorXd m;
  FourierLoop z;
  double F = 0.0;
  double grad_norm = 0.0;
  double dt = 0.05;
  double path_pos = -1.0;  // seed parameter along the s-ray; -1 = free point
  bool frozen = false;
  double decrease_integral = 0.0;  // int ||grad F||^2 dt along the trajectory
  double last_diff = 0.0;          // H^{1/2} change of (z+ - z-) per step
  std::optional<FourierLoop> prev_pm;

  // minimum-gradient state seen along the trajectory while the point still
  // held a positive level; candidates are polished from here, since a single
  // step near a saddle can amplify the gradient by the Hessian scale
  double best_grad = std::numeric_limits<double>::infinity();
  double best_F = 0.0;
  std::optional<FourierLoop> best_z;
  VectorXd best_m;
};

struct MinimaxState {
  double time = 0.0;
  std::vector<FrontPoint> front;
  double sup_value = 0.0;
  int argmax = 0;
  std::vector<std::pair<double, double>> history;  // (t, sup)
  std::vector<PSRecord> ps_records;
  long grad_evals = 0;
};

class FlowContext {
 public:
  FlowContext(const ModelSystem& sys, const CutoffProfile& prof,
              const LoopGrid& grid, double base_step)
      : sys_(&sys), prof_(prof), grid_(grid), base_step_(base_step) {}

  // per-step descent cap: a step may not drop F by more than this, so
  // trajectories resolve the cutoff cliff instead of vaulting it
  double drop_cap = std::numeric_limits<double>::infinity();

  const LoopGrid& grid() const { return grid_; }
  const CutoffProfile& profile() const { return prof_; }
  const ModelSystem& system() const { return *sys_; }

  const ModifiedHamiltonian& modified_at(const VectorXd& m) const {
    if (!hm_ || (hm_->frame.m - m).norm() > 1e-14) hm_ = make_modified(*sys_, prof_, m);
    return *hm_;
  }

  double action(const VectorXd& m, const FourierLoop& z) const {
    FourierLoop zz = z;
    zz.m = m;
    return eval_action(modified_at(m), zz, grid_);
  }

  FourierLoop fibre_grad(const VectorXd& m, const FourierLoop& z,
                         double* value, long& evals) const {
    ++evals;
    FourierLoop zz = z;
    zz.m = m;
    return grad_action_fibre(modified_at(m), zz, grid_, value);
  }

  // cheap 2nd-order base gradient used inside the flow
  VectorXd base_grad(const VectorXd& m, const FourierLoop& z) const {
    const int td = sys_->base_dim();
    VectorXd g = VectorXd::Zero(td);
    if (td == 0) return g;
    for (int i = 0; i < td; ++i) {
      VectorXd mp = m, mm = m;
      mp[i] += base_step_;
      mm[i] -= base_step_;
      g[i] = (action(mp, z) - action(mm, z)) / (2.0 * base_step_);
    }
    return g;
  }

 private:
  const ModelSystem* sys_;
  CutoffProfile prof_;
  LoopGrid grid_;
  double base_step_;
  mutable std::optional<ModifiedHamiltonian> hm_;
};

// One adaptive explicit-midpoint step of (zdot, mdot) = -grad F. The step is
// rejected and halved whenever the point's F increases, which keeps the
// front's sup non-increasing.
inline void flow_step(const FlowContext& ctx, FrontPoint& p, long& evals) {
  double f0;
  FourierLoop g1 = ctx.fibre_grad(p.m, p.z, &f0, evals);
  VectorXd gb1 = ctx.base_grad(p.m, p.z);
  p.F = f0;
  p.grad_norm = std::sqrt(h_half_inner(g1, g1) + gb1.squaredNorm());
  if (p.grad_norm < p.best_grad) {
    p.best_grad = p.grad_norm;
    p.best_F = p.F;
    p.best_z = p.z;
    p.best_m = p.m;
  }
  while (true) {
    if (p.dt < 1e-12)
      throw ConvergenceError(
          "flow_step: step size underflow (dt < 1e-12) at F = " +
          std::to_string(p.F));
    double half = 0.5 * p.dt;
    FourierLoop z_half = p.z - half * g1;
    VectorXd m_half = p.m - half * gb1;
    z_half.m = m_half;
    double f_half;
    FourierLoop g2 = ctx.fibre_grad(m_half, z_half, &f_half, evals);
    VectorXd gb2 = ctx.base_grad(m_half, z_half);

    FourierLoop z_new = p.z - p.dt * g2;
    VectorXd m_new = p.m - p.dt * gb2;
    z_new.m = m_new;
    double f_new = ctx.action(m_new, z_new);
    if (f_new <= p.F + 1e-13 * (1.0 + std::abs(p.F)) &&
        p.F - f_new <= ctx.drop_cap) {
      double g2n2 = h_half_inner(g2, g2) + gb2.squaredNorm();
      p.decrease_integral += p.dt * g2n2;
      FourierLoop pm = project(z_new, LoopPart::E_plus) -
                       project(z_new, LoopPart::E_minus);
      if (p.prev_pm) p.last_diff = h_half_norm(pm - *p.prev_pm);
      p.prev_pm = pm;
      p.z = z_new;
      p.m = m_new;
      p.F = f_new;
      p.dt = std::min(p.dt * 1.25, 0.5);
      return;
    }
    p.dt *= 0.5;
  }
}

// ---------------------------------------------------------------------------
// Newton polish (fibre gradient at frozen base point)

inline CriticalCandidate polish_critical(const ModifiedHamiltonian& hm,
                                         const CriticalCandidate& input,
                                         const LoopGrid& grid,
                                         double tol_grad = 1e-9,
                                         int max_iter = 25) {
  CriticalCandidate cand = input;
  cand.polished = false;
  cand.newton_iters = 0;
  const ModelSystem& sys = *hm.sys;
  const int dim = 2 * sys.n, td = 2 * sys.l, K = grid.K;
  const int ncols = 2 * K + 1;
  const int D = dim * ncols - td;  // tangential mean pinned at zero

  auto pack = [&](const FourierLoop& z) {
    VectorXd v(D);
    int idx = 0;
    for (int c = 0; c < ncols; ++c)
      for (int i = 0; i < dim; ++i) {
        if (c == K && i < td) continue;
        v[idx++] = z.coeffs(i, c);
      }
    return v;
  };
  auto unpack = [&](const VectorXd& v) {
    FourierLoop z = FourierLoop::zero(cand.m, K, sys.n, sys.l);
    int idx = 0;
    for (int c = 0; c < ncols; ++c)
      for (int i = 0; i < dim; ++i) {
        if (c == K && i < td) continue;
        z.coeffs(i, c) = v[idx++];
      }
    return z;
  };
  auto grad_vec = [&](const VectorXd& v, double* value) {
    return pack(grad_action_fibre(hm, unpack(v), grid, value));
  };

  // Critical loops of an autonomous h_m come in time-shift families, so the
  // plain Jacobian is singular along d/d theta z(. + theta). Border the
  // system with that phase direction.
  auto shift_direction = [&](const FourierLoop& z) {
    FourierLoop w = FourierLoop::zero(cand.m, K, sys.n, sys.l);
    for (int k = -K; k <= K; ++k)
      w.coeffs.col(w.col(k)) = two_pi * k * z.j_apply(z.coeffs.col(z.col(k)));
    return w;
  };

  VectorXd theta = pack(cand.z);
  double value0;
  VectorXd G = grad_vec(theta, &value0);
  double gn = G.norm();
  cand.value = value0;
  cand.grad_norm = gn;

  for (int iter = 0; iter < max_iter && gn > tol_grad; ++iter) {
    const double step = 1e-6 * std::max(1.0, theta.norm());
    MatrixXd B = MatrixXd::Zero(D + 1, D + 1);
    for (int j = 0; j < D; ++j) {
      VectorXd tp = theta, tm = theta;
      tp[j] += step;
      tm[j] -= step;
      B.col(j).head(D) =
          (grad_vec(tp, nullptr) - grad_vec(tm, nullptr)) / (2.0 * step);
    }
    VectorXd w = pack(shift_direction(unpack(theta)));
    double wn = w.norm();
    VectorXd dtheta;
    if (wn > 1e-12 * std::max(1.0, theta.norm())) {
      w /= wn;
      B.col(D).head(D) = w;
      B.row(D).head(D) = w.transpose();
      Eigen::FullPivLU<MatrixXd> lu(B);
      if (!lu.isInvertible()) {
        cand.polish_residual = gn;
        return cand;  // singular bordered system: divergence reported
      }
      VectorXd rhs = VectorXd::Zero(D + 1);
      rhs.head(D) = G;
      dtheta = lu.solve(rhs).head(D);
    } else {
      // no shift family at this iterate (near-constant loop): plain Newton
      Eigen::FullPivLU<MatrixXd> lu(B.topLeftCorner(D, D));
      if (!lu.isInvertible()) {
        cand.polish_residual = gn;
        return cand;
      }
      dtheta = lu.solve(G);
    }
    bool accepted = false;
    double damp = 1.0;
    for (int attempt = 0; attempt < 10; ++attempt) {
      VectorXd trial = theta - damp * dtheta;
      double vtrial;
      VectorXd Gt = grad_vec(trial, &vtrial);
      if (Gt.norm() < gn) {
        theta = trial;
        G = Gt;
        gn = Gt.norm();
        cand.value = vtrial;
        accepted = true;
        break;
      }
      damp *= 0.5;
    }
    cand.newton_iters = iter + 1;
    if (!accepted) break;
  }

  cand.z = unpack(theta);
  cand.z.m = cand.m;
  cand.grad_norm = gn;
  cand.polish_residual = gn;
  cand.value_drift = std::abs(cand.value - value0);
  cand.polished = gn <= tol_grad;
  return cand;
}

inline CriticalCandidate polish_critical(const ModelSystem& sys,
                                         const CutoffProfile& prof,
                                         const CriticalCandidate& input,
                                         const LoopGrid& grid,
                                         double tol_grad = 1e-9,
                                         int max_iter = 25) {
  ModifiedHamiltonian hm = make_modified(sys, prof, input.m);
  CriticalCandidate cand = polish_critical(hm, input, grid, tol_grad, max_iter);
  if (sys.base_dim() > 0)
    cand.base_grad_norm =
        grad_action_base(sys, prof, cand.m, cand.z, grid).norm();
  return cand;
}

// ---------------------------------------------------------------------------
// minimax search

namespace detail {

inline void recompute_sup(MinimaxState& st) {
  st.sup_value = -std::numeric_limits<double>::infinity();
  st.argmax = 0;
  for (std::size_t i = 0; i < st.front.size(); ++i)
    if (st.front[i].F > st.sup_value) {
      st.sup_value = st.front[i].F;
      st.argmax = int(i);
    }
}

}  // namespace detail

inline SearchResult minimax_search(const ModelSystem& sys,
                                   const CutoffProfile& prof,
                                   const LinkingConfig& cfg, const VectorXd& m0,
                                   const LoopGrid& grid,
                                   const SearchOptions& opt = {}) {
  const int n = sys.n, l = sys.l, K = grid.K;
  const int dim = 2 * n, ndim = 2 * (n - l);
  FlowContext ctx(sys, prof, grid, opt.base_step);
  ctx.drop_cap = 0.1 * cfg.beta_floor;

  MinimaxState st;
  FourierLoop e_ray = e_N_plus(m0, K, n, l);
  auto ray_action = [&](double s) { return ctx.action(m0, s * e_ray); };
  auto add_point = [&](const FourierLoop& z, double path_pos) {
    FrontPoint p;
    p.m = m0;
    p.z = z;
    p.z.m = m0;
    p.dt = opt.dt_init;
    p.path_pos = path_pos;
    p.F = ctx.action(m0, p.z);
    st.front.push_back(std::move(p));
  };
  auto add_ray_point = [&](double s) { add_point(s * e_ray, s); };

  // the s-ray through e_N^+ plus the Sigma/Gamma intersection point
  double s_star = std::sqrt(cfg.alpha / two_pi);
  for (int j = 1; j <= opt.s_ray; ++j) add_ray_point(cfg.tau * j / opt.s_ray);
  add_ray_point(s_star);
  // maximizer of F along the ray: the sampled Sigma must resolve its own
  // sup or the recorded trace starts below the ridge. F is multimodal along
  // the ray (ridge, then the negative g-region barrier), so scan a fine grid
  // first and refine the best cell by golden section.
  {
    const int scan = 400;
    int jbest = 1;
    double fbest = -std::numeric_limits<double>::infinity();
    for (int j = 1; j <= scan; ++j) {
      double fj = ray_action(cfg.tau * j / scan);
      if (fj > fbest) {
        fbest = fj;
        jbest = j;
      }
    }
    double a = cfg.tau * std::max(1, jbest - 1) / scan;
    double b2 = cfg.tau * std::min(scan, jbest + 1) / scan;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b2 - gr * (b2 - a), x2 = a + gr * (b2 - a);
    double f1 = ray_action(x1), f2 = ray_action(x2);
    for (int it = 0; it < 60; ++it) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b2 - a);
        f2 = ray_action(x2);
      } else {
        b2 = x2;
        x2 = x1;
        f2 = f1;
        x1 = b2 - gr * (b2 - a);
        f1 = ray_action(x1);
      }
    }
    double s_top = 0.5 * (a + b2);
    add_ray_point(s_top);
    add_ray_point(0.995 * s_top);
    add_ray_point(1.005 * s_top);
  }
  // mixed slice points
  std::size_t hidx = 5000;
  for (int i = 0; i < opt.mixed; ++i) {
    VectorXd u = halton_ball_point(hidx++, dim + ndim);
    VectorXd cm1 = u.head(dim);
    VectorXd y0 = u.tail(ndim);
    detail::scale_slice(cm1, y0, 0.5 * cfg.tau);
    double s = cfg.tau * halton(hidx++, 11);
    add_point(detail::sigma_point(m0, K, n, l, cm1, y0, s), -1.0);
  }

  detail::recompute_sup(st);
  const double beta = cfg.beta_floor;
  const double freeze_floor = -(10.0 * prof.b + 1.0);
  SearchResult res;
  std::optional<CriticalCandidate> best;

  auto record = [&]() {
    st.history.emplace_back(st.time, st.sup_value);
    PSRecord rec;
    rec.t = st.time;
    rec.sup = st.sup_value;
    const FrontPoint& am = st.front[std::size_t(st.argmax)];
    rec.argmax_grad = am.grad_norm;
    rec.argmax_znorm = h_half_norm(am.z);
    rec.argmax_diff = am.last_diff;
    rec.front_size = int(st.front.size());
    rec.min_grad = std::numeric_limits<double>::infinity();
    rec.dist_gamma = std::numeric_limits<double>::infinity();
    for (const auto& p : st.front) {
      if (!p.frozen && p.grad_norm > 0.0 && p.grad_norm < rec.min_grad) {
        rec.min_grad = p.grad_norm;
        rec.min_grad_znorm = h_half_norm(p.z);
      }
      rec.dist_gamma =
          std::min(rec.dist_gamma, detail::dist_to_gamma(p.z, cfg.alpha));
    }
    st.ps_records.push_back(rec);
    if (st.sup_value > beta)
      res.linking_proximity = std::min(res.linking_proximity, rec.dist_gamma);
  };

  long last_polish_at = -1000000;
  double last_polish_grad = std::numeric_limits<double>::infinity();
  auto try_polish = [&](FrontPoint& p) {
    CriticalCandidate seed;
    seed.m = p.best_m;
    seed.z = *p.best_z;
    seed.value = p.best_F;
    seed.grad_norm = p.best_grad;
    last_polish_grad = p.best_grad;
    p.best_grad = std::numeric_limits<double>::infinity();  // consume it
    CriticalCandidate cand =
        polish_critical(sys, prof, seed, grid, opt.tol_grad);
    // a polished point only counts when it carries the linking level
    if (cand.polished && cand.value >= beta - 1e-8 &&
        (!best || cand.value > best->value))
      best = cand;
    return bool(best);
  };
  // capture eligibility: small gradient at a state still holding the level
  // (collapsing points would polish onto the zero loop); after a failed
  // attempt, require a clear improvement before paying for another Jacobian
  auto capture_ready = [&](const FrontPoint& p) {
    return !p.frozen && p.best_z && p.best_grad <= opt.capture_threshold &&
           p.best_grad < 0.5 * last_polish_grad && p.best_F >= 0.75 * beta;
  };

  // basin of attraction along the ray: LEFT collapses toward the constant
  // loops, RIGHT escapes past the level band. F decreases along
  // trajectories, so classifications only ever move downward.
  enum Basin { UNDECIDED, LEFT, RIGHT };
  auto basin = [&](const FrontPoint& p) {
    if (p.F < -0.5 * beta) return RIGHT;
    if (p.F < 0.5 * beta) return LEFT;
    return UNDECIDED;
  };

  detail::recompute_sup(st);
  record();

  // The critical loop sits within a fraction of a percent of the ray's
  // ridge (the level band is that thin), so try Newton from the ridge
  // neighborhood before paying for any flow. The gradient flow and the
  // bisection below remain the fallback when the landscape is less kind.
  {
    double s_top = st.front[std::size_t(st.argmax)].path_pos;
    // The critical circle sits a ray-relative O(eps^{3/2}) inside the band
    // (f' at a 1-periodic loop is tiny, so the orbit hugs the band edge,
    // which is also where the ridge top sits).
    double du = 0.0128 * std::pow(prof.epsilon, 1.5);
    std::vector<double> offsets = {0.0,     du,      -du,     0.5 * du,
                                   -0.5 * du, 2.0 * du, -2.0 * du, 4.0 * du,
                                   5e-4,    -5e-4,   1e-3,    -1e-3};
    if (s_top > 0.0) {
      for (double off : offsets) {
        CriticalCandidate seed;
        seed.m = m0;
        seed.z = ((1.0 + off) * s_top) * e_ray;
        seed.z.m = m0;
        seed.value = ctx.action(m0, seed.z);
        seed.grad_norm = 1.0;
        CriticalCandidate cand =
            polish_critical(sys, prof, seed, grid, opt.tol_grad, 20);
        if (cand.polished && cand.value >= beta - 1e-8 &&
            (!best || cand.value > best->value)) {
          best = cand;
          res.converged = true;
          res.c_estimate = st.sup_value;
          break;
        }
      }
    }
  }

  int sweeps = 0;
  while (st.grad_evals < opt.budget &&
         (!res.converged || sweeps < opt.min_sweeps)) {
    ++sweeps;
    for (auto& p : st.front) {
      if (p.frozen) continue;
      p.dt = std::min(p.dt, opt.dt_max);
      flow_step(ctx, p, st.grad_evals);
      if (p.F < freeze_floor) p.frozen = true;
      // settled collapse toward the constant loops: no longer informative
      if (p.F > -0.1 * beta && p.F < 0.25 * beta &&
          p.grad_norm < 1e-3 * std::sqrt(beta))
        p.frozen = true;
      if (st.grad_evals >= opt.budget) break;
    }

    // capture: polish the best eligible snapshot (throttled)
    if (!res.converged && st.grad_evals - last_polish_at > 400) {
      FrontPoint* ready = nullptr;
      for (auto& p : st.front)
        if (capture_ready(p) && (!ready || p.best_grad < ready->best_grad))
          ready = &p;
      if (ready) {
        last_polish_at = st.grad_evals;
        if (try_polish(*ready)) {
          res.converged = true;
          res.c_estimate = st.sup_value;
        }
      }
    }

    // mountain-pass bisection on the seed parameter: keep one undecided
    // probe inside the bracket between the deepest collapsing seed and the
    // shallowest escaping seed
    for (int spawn = 0; spawn < 3 && !res.converged; ++spawn) {
      double s_right = std::numeric_limits<double>::infinity();
      for (const auto& p : st.front)
        if (p.path_pos > 0.0 && basin(p) == RIGHT)
          s_right = std::min(s_right, p.path_pos);
      double s_left = 0.0;
      bool undecided_inside = false;
      for (const auto& p : st.front) {
        if (p.path_pos <= 0.0 || p.path_pos >= s_right) continue;
        Basin bs = basin(p);
        if (bs == LEFT) s_left = std::max(s_left, p.path_pos);
        if (bs == UNDECIDED) undecided_inside = true;
      }
      if (undecided_inside || !std::isfinite(s_right) || s_left <= 0.0)
        break;
      if (s_right - s_left < 32.0 * std::numeric_limits<double>::epsilon() *
                                 cfg.tau ||
          int(st.front.size()) >= opt.front_cap)
        break;
      FrontPoint fresh;
      fresh.m = m0;
      fresh.path_pos = 0.5 * (s_left + s_right);
      fresh.z = fresh.path_pos * e_ray;
      fresh.z.m = m0;
      fresh.dt = opt.dt_init;
      fresh.F = ctx.action(m0, fresh.z);
      // flow the probe below the recorded sup before admitting it
      int guard = 0;
      while (fresh.F > st.sup_value && guard++ < 2000 &&
             st.grad_evals < opt.budget) {
        fresh.dt = std::min(fresh.dt, opt.dt_max);
        flow_step(ctx, fresh, st.grad_evals);
        if (capture_ready(fresh) && st.grad_evals - last_polish_at > 400) {
          last_polish_at = st.grad_evals;
          if (try_polish(fresh)) {
            res.converged = true;
            res.c_estimate = st.sup_value;
            break;
          }
        }
      }
      if (fresh.F <= st.sup_value) st.front.push_back(std::move(fresh));
    }

    st.time += opt.dt_init;  // nominal trace time; points carry their own dt
    detail::recompute_sup(st);
    record();
    if (opt.verbose && st.history.size() % 25 == 1) {
      const FrontPoint& am = st.front[std::size_t(st.argmax)];
      std::fprintf(stderr,
                   "[minimax] sweep %zu sup=%.6e argmax(pp=%.4g F=%.3e g=%.3e "
                   "bg=%.3e) front=%zu evals=%ld\n",
                   st.history.size(), st.sup_value, am.path_pos, am.F,
                   am.grad_norm, am.best_grad, st.front.size(), st.grad_evals);
    }
  }

  if (!best) {
    // budget exhausted: return the argmax unpolished, flagged unconverged
    const FrontPoint& am = st.front[std::size_t(st.argmax)];
    CriticalCandidate cand;
    cand.m = am.m;
    cand.z = am.z;
    cand.value = am.F;
    cand.grad_norm = am.grad_norm;
    cand.polish_residual = am.grad_norm;
    res.candidate = cand;
  } else {
    res.candidate = *best;
  }
  // the estimate is frozen at capture time; post-capture sweeps only feed
  // the diagnostics and must not drag it down with the decaying sample sup
  if (!res.converged) res.c_estimate = st.sup_value;
  res.grad_evals = st.grad_evals;
  res.trace = st.ps_records;

  if (!res.converged && res.c_estimate < cfg.beta_floor - 1e-8)
    throw VerificationError(
        "minimax_search: sup fell below beta_floor (sampled linking lost the "
        "intersection; refine sigma_grid)");
  return res;
}

// ---------------------------------------------------------------------------
// Palais-Smale diagnostics

struct PSDiagnostics {
  bool empty = true;
  bool bounded = true;
  bool cauchy = true;
  double decay_rate = 0.0;
  bool slow_decay = false;
  std::vector<std::string> warnings;
};

// Examines the near-critical subsequence of a flow run: boundedness of
// ||z||_{1/2} for small-gradient points and the Cauchy behaviour of
// (z+ - z-) at the argmax. Diagnostic only; a warning here indicates a
// configuration near resonance at the working truncation.
inline PSDiagnostics palais_smale_monitor(const std::vector<PSRecord>& records) {
  PSDiagnostics d;
  if (records.empty()) return d;
  d.empty = false;

  const std::size_t nrec = records.size();
  const std::size_t half = nrec / 2;
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < half; ++i) early = std::max(early, records[i].min_grad_znorm);
  for (std::size_t i = half; i < nrec; ++i) late = std::max(late, records[i].min_grad_znorm);
  if (early > 0.0 && late > early * 1.02) {
    d.bounded = false;
    d.warnings.push_back(
        "near-critical points have growing H^{1/2} norm (resonance proxy)");
  }

  double diff_early = 0.0, diff_late = 0.0;
  std::size_t quarter = std::max<std::size_t>(nrec / 4, 1);
  for (std::size_t i = 0; i < quarter; ++i) diff_early += records[i].argmax_diff;
  for (std::size_t i = nrec - quarter; i < nrec; ++i) diff_late += records[i].argmax_diff;
  diff_early /= double(quarter);
  diff_late /= double(quarter);
  if (diff_late > 0.5 * diff_early && diff_late > 1e-6) {
    d.cauchy = false;
    d.warnings.push_back("(z+ - z-) increments are not settling");
  }

  // exponential decay rate of the argmax gradient over the tail
  std::vector<double> ts, gs;
  for (std::size_t i = half; i < nrec; ++i) {
    if (records[i].argmax_grad > 0.0) {
      ts.push_back(records[i].t);
      gs.push_back(records[i].argmax_grad);
    }
  }
  if (ts.size() >= 4 && ts.back() > ts.front()) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      double x = ts[i], y = std::log(gs[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    double nn = double(ts.size());
    double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    d.decay_rate = -slope;
  }
  d.slow_decay = !d.bounded || (d.decay_rate < 0.05 && d.decay_rate >= 0.0 &&
                                records.back().argmax_grad > 1e-10);
  if (d.slow_decay && d.warnings.empty())
    d.warnings.push_back("gradient decay is slow (small resonance margin)");
  return d;
}

}  // namespace orbitlab
