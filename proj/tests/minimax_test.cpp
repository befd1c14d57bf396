#include <catch2/catch_amalgamated.hpp>

#include "orbitlab/minimax.hpp"
#include "orbitlab/systems.hpp"

using namespace orbitlab;

TEST_CASE("spectral q-check margins", "[minimax]") {
  QCheckReport rep = spectral_q_check(16, 3.0);
  REQUIRE(rep.margin == Catch::Approx(pi));  // 3 pi sits between 2 pi and 4 pi
  REQUIRE(std::abs(rep.nearest_k) == 1);

  REQUIRE_THROWS_AS(spectral_q_check(16, 2.0), ConfigError);
  REQUIRE_THROWS_AS(spectral_q_check(16, 4.0), ConfigError);

  QCheckReport r2 = spectral_q_check(16, 2.5);
  REQUIRE(r2.margin == Catch::Approx(pi / 2.0));
}

TEST_CASE("choose_parameters: binding branch and intersection point",
          "[minimax]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  LoopGrid grid = LoopGrid::make(16, 66);
  LinkingConfig cfg = choose_parameters(ho, prof, VectorXd(), grid);

  // q = 3, c = 1: (q/2) pi c - pi = pi/2, so b/(pi/2) < 2b and tau^2 >= 2b binds
  REQUIRE(cfg.tau_branch == "0.5 tau^2 >= b");
  REQUIRE(cfg.tau == Catch::Approx(1.05 * std::sqrt(2.0 * prof.b)));
  REQUIRE(cfg.tau * cfg.tau >= 2.0 * prof.b);
  REQUIRE(cfg.tau * cfg.tau * (0.5 * prof.q * pi - pi) >= prof.b);
  REQUIRE(cfg.alpha < cfg.tau * cfg.tau);

  REQUIRE(cfg.boundary_max_F <= 1e-9);
  REQUIRE(cfg.beta_floor > 0.0);
  REQUIRE(cfg.gamma_min_F >= cfg.alpha / 4.0);

  // the intersection sqrt(alpha/2pi) e_N^+ lies in both sets and carries
  // F = alpha/2 while it stays in the zero region
  double s_star = std::sqrt(cfg.alpha / two_pi);
  REQUIRE(s_star <= cfg.tau);
  FourierLoop zi = s_star * e_N_plus(VectorXd(), 16, 1, 0);
  double ypn2 = h_half_inner(project(project(zi, LoopPart::E_plus), LoopPart::E_N),
                             project(project(zi, LoopPart::E_plus), LoopPart::E_N));
  REQUIRE(ypn2 == Catch::Approx(cfg.alpha).epsilon(1e-12));
  ModifiedHamiltonian hm = make_modified(ho, prof, VectorXd());
  REQUIRE(eval_action(hm, zi, grid) == Catch::Approx(cfg.alpha / 2.0).margin(1e-14));
}

TEST_CASE("flow: critical points are fixed points", "[minimax]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  LoopGrid grid = LoopGrid::make(8, 40);
  FlowContext ctx(ho, prof, grid, 1e-4);
  FrontPoint p;
  p.m = VectorXd();
  p.z = FourierLoop::zero(VectorXd(), 8, 1, 0);
  p.F = 0.0;
  long evals = 0;
  flow_step(ctx, p, evals);
  REQUIRE(p.z.coeffs.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(p.F == 0.0);
}

TEST_CASE("flow contracts E+ at unit rate inside the zero region", "[minimax]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  LoopGrid grid = LoopGrid::make(8, 40);
  FlowContext ctx(ho, prof, grid, 1e-4);

  const double s0 = 0.02;
  FrontPoint p;
  p.m = VectorXd();
  p.z = s0 * e_N_plus(VectorXd(), 8, 1, 0);
  p.F = ctx.action(p.m, p.z);
  double F0 = p.F;

  long evals = 0;
  const double dt = 5e-4;
  double T = 0.0;
  for (int i = 0; i < 1000; ++i) {
    p.dt = dt;
    flow_step(ctx, p, evals);
    T += dt;
  }
  double expected = s0 * std::exp(-T) * std::sqrt(two_pi);
  REQUIRE(h_half_norm(p.z) == Catch::Approx(expected).epsilon(1e-6));

  // gradient-flow energy identity: F(0) - F(T) = int ||grad F||^2 dt
  double drop = F0 - p.F;
  REQUIRE(p.decrease_integral == Catch::Approx(drop).epsilon(1e-4));
}

TEST_CASE("minimax on the harmonic oscillator finds the circle", "[minimax]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  const double eps = 0.1;
  CutoffProfile prof = build_profile(ho, eps, 3.0);
  LoopGrid grid = LoopGrid::make(16, 66);
  LinkingConfig cfg = choose_parameters(ho, prof, VectorXd(), grid);
  SearchOptions opt;
  opt.budget = 40000;
  SearchResult res = minimax_search(ho, prof, cfg, VectorXd(), grid, opt);

  REQUIRE(res.converged);
  REQUIRE(res.c_estimate > 0.0);
  REQUIRE(res.c_estimate >= cfg.beta_floor - 1e-8);
  REQUIRE(res.candidate.polished);
  REQUIRE(res.candidate.grad_norm <= 1e-9);
  REQUIRE(res.candidate.value > 0.0);

  // sup trace is non-increasing
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    REQUIRE(res.trace[i].sup <= res.trace[i - 1].sup + 1e-12);

  // numerical linking persistence
  REQUIRE(res.linking_proximity <= 10.0 * std::sqrt(cfg.alpha));

  // the polished loop is a circle on a level in the rho-band
  LoopGrid fine = LoopGrid::make(16, 96);
  MatrixXd samples = synthesize(res.candidate.z, fine);
  VectorXd radii(samples.cols());
  for (int j = 0; j < samples.cols(); ++j) radii[j] = samples.col(j).norm();
  double rmin = radii.minCoeff(), rmax = radii.maxCoeff();
  REQUIRE(rmax - rmin < 1e-8);
  double energy = rmax * rmax;  // H = |z|^2
  double rho = (energy - eps * eps) * 4.0 / (eps * eps);
  REQUIRE(std::abs(rho) <= eps);
}

TEST_CASE("polish: exact critical points are kept, perturbations recovered",
          "[minimax]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  LoopGrid grid = LoopGrid::make(16, 66);
  LinkingConfig cfg = choose_parameters(ho, prof, VectorXd(), grid);
  SearchOptions opt;
  opt.budget = 40000;
  SearchResult res = minimax_search(ho, prof, cfg, VectorXd(), grid, opt);
  REQUIRE(res.converged);

  CriticalCandidate again =
      polish_critical(ho, prof, res.candidate, grid, 1e-9);
  REQUIRE(again.polished);
  REQUIRE(again.newton_iters <= 1);
  REQUIRE(std::abs(again.value - res.candidate.value) < 1e-10);

  // The critical circle sits O(eps^2 sqrt(eps)) away from the band-edge kink
  // of f (f' at a 1-periodic orbit is tiny, so the orbit hugs the edge);
  // Newton's smooth cell is a few 1e-5 wide here and the perturbation must
  // stay inside it.
  SplitMix64 rng(77);
  CriticalCandidate noisy = res.candidate;
  for (int k = -16; k <= 16; ++k)
    noisy.z.coeffs.col(noisy.z.col(k)) +=
        1e-6 * std::pow(0.5, std::abs(k)) * rng.normal_vector(2);
  noisy.z.enforce_mean_zero();
  CriticalCandidate fixed = polish_critical(ho, prof, noisy, grid, 1e-9);
  REQUIRE(fixed.polished);
  REQUIRE(fixed.newton_iters <= 25);
  REQUIRE(fixed.grad_norm <= 1e-9);
  REQUIRE(std::abs(fixed.value - res.candidate.value) < 1e-6);
}

TEST_CASE("polish: resonant quadratic tail has a singular Jacobian",
          "[minimax]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  LoopGrid grid = LoopGrid::make(8, 40);
  ModifiedHamiltonian hm = make_quadratic_tail(ho, 2.0, VectorXd());

  CriticalCandidate cand;
  cand.m = VectorXd();
  cand.z = FourierLoop::zero(VectorXd(), 8, 1, 0);
  cand.z.coeffs(0, cand.z.col(1)) = 0.3;   // in the Jacobian kernel at q = 2
  cand.z.coeffs(0, cand.z.col(2)) = 0.05;  // carries a nonzero gradient
  CriticalCandidate out = polish_critical(hm, cand, grid, 1e-9);
  REQUIRE_FALSE(out.polished);  // divergence reported, candidate unpolished

  // off resonance the same candidate polishes to the zero loop
  ModifiedHamiltonian hm3 = make_quadratic_tail(ho, 3.0, VectorXd());
  CriticalCandidate ok = polish_critical(hm3, cand, grid, 1e-9);
  REQUIRE(ok.polished);
}

TEST_CASE("Palais-Smale monitor", "[minimax]") {
  // empty history -> empty report
  PSDiagnostics d0 = palais_smale_monitor({});
  REQUIRE(d0.empty);

  // clean converged run
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  LoopGrid grid = LoopGrid::make(16, 66);
  LinkingConfig cfg = choose_parameters(ho, prof, VectorXd(), grid);
  SearchOptions opt;
  opt.budget = 40000;
  SearchResult res = minimax_search(ho, prof, cfg, VectorXd(), grid, opt);
  PSDiagnostics d1 = palais_smale_monitor(res.trace);
  REQUIRE_FALSE(d1.empty);
  REQUIRE(d1.bounded);

  // synthetic resonance signature: near-critical points with growing norm
  std::vector<PSRecord> synth;
  for (int i = 0; i < 200; ++i) {
    PSRecord r;
    r.t = 0.05 * i;
    r.sup = 1.0;
    r.argmax_grad = 0.01;
    r.argmax_znorm = 1.0;
    r.argmax_diff = 1e-8;
    r.min_grad = 0.005;
    r.min_grad_znorm = 1.0 + 0.005 * i;  // slow drift outward
    synth.push_back(r);
  }
  PSDiagnostics d2 = palais_smale_monitor(synth);
  REQUIRE_FALSE(d2.bounded);
  REQUIRE(d2.slow_decay);
  REQUIRE_FALSE(d2.warnings.empty());
}
