#include <catch2/catch_amalgamated.hpp>

#include "orbitlab/action.hpp"
#include "orbitlab/systems.hpp"

using namespace orbitlab;

namespace {

Fourier2 varying_field() {
  Fourier2 B = Fourier2::constant(1.0);
  B.terms.push_back({1, 0, 0.3, 0.0});
  return B;
}

FourierLoop random_loop(SplitMix64& rng, const VectorXd& m, int K, int n, int l,
                        double scale) {
  FourierLoop z = FourierLoop::zero(m, K, n, l);
  for (int k = -K; k <= K; ++k) {
    double amp = scale * std::pow(0.5, std::abs(k));
    for (int i = 0; i < 2 * n; ++i) z.coeffs(i, z.col(k)) = amp * rng.normal();
  }
  z.enforce_mean_zero();
  return z;
}

}  // namespace

TEST_CASE("profile admissibility and parameter window", "[action]") {
  ModelSystem torus = magnetic_torus(Fourier2::constant(1.0));

  // magnetic torus: l = 1, n = 2 -> q > max(2l/(n-l), 2/c) = 2, q = 3 works
  CutoffProfile prof = build_profile(torus, 0.1, 3.0);
  REQUIRE(prof.gamma < prof.r);
  REQUIRE(prof.r < 2.0 * prof.gamma);
  REQUIRE(0.5 * 3.0 * pi * prof.r * prof.r < prof.b);
  REQUIRE(prof.b < 3.0 * pi * prof.r * prof.r);
  REQUIRE(prof.b == Catch::Approx(0.75 * 3.0 * pi * prof.r * prof.r));

  REQUIRE_THROWS_AS(build_profile(torus, 0.1, 2.0), ConfigError);  // even
  REQUIRE_THROWS_AS(build_profile(torus, 0.1, 4.0), ConfigError);  // even
  REQUIRE_THROWS_AS(build_profile(torus, 0.1, 1.9), ConfigError);  // too small
  REQUIRE_NOTHROW(build_profile(torus, 0.1, 2.5));
}

TEST_CASE("gamma matches the analytic level radius", "[action]") {
  // H = |z|^2: S_1 = {|z|^2 = 1.25 eps^2}, gamma = sqrt(1.25) eps.
  ModelSystem ho = point_quadratic(1, {1.0});
  for (double eps : {0.2, 0.05}) {
    CutoffProfile prof = build_profile(ho, eps, 3.0);
    REQUIRE(prof.gamma == Catch::Approx(std::sqrt(1.25) * eps).epsilon(1e-8));
  }
  // magnetic torus, B = 2: limiting Hamiltonian is 2|y|^2.
  ModelSystem torus = magnetic_torus(Fourier2::constant(2.0));
  CutoffProfile p2 = build_profile(torus, 0.1, 3.0);
  REQUIRE(p2.gamma == Catch::Approx(std::sqrt(1.25 / 2.0) * 0.1).epsilon(1e-8));
}

TEST_CASE("g-tail properties", "[action]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  const double q = prof.q;

  REQUIRE(prof.g(prof.r) == Catch::Approx(prof.b));
  REQUIRE(prof.g_deriv(prof.r) == 0.0);
  REQUIRE(prof.g(prof.s_quad) ==
          Catch::Approx(0.5 * q * pi * prof.s_quad * prof.s_quad));
  // C^1 join at s_join (value and derivative from both branches)
  double sj = prof.s_join;
  REQUIRE(prof.g(sj * (1 - 1e-10)) ==
          Catch::Approx(0.5 * q * pi * sj * sj).epsilon(1e-8));
  REQUIRE(prof.g_deriv(sj * (1 - 1e-10)) ==
          Catch::Approx(q * pi * sj).epsilon(1e-4));
  for (int i = 1; i < 200; ++i) {
    double s = prof.r + (prof.s_quad - prof.r) * i / 200.0;
    REQUIRE(prof.g(s) >= 0.5 * q * pi * s * s - 1e-12);
    REQUIRE(prof.g_deriv(s) >= 0.0);
    REQUIRE(prof.g_deriv(s) <= q * pi * s + 1e-12);
  }
}

TEST_CASE("f-profile switch", "[action]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  REQUIRE(prof.f(-prof.epsilon) == 0.0);
  REQUIRE(prof.f(-1.0) == 0.0);
  REQUIRE(prof.f(prof.epsilon) == Catch::Approx(prof.b));
  REQUIRE(prof.f(1.0) == Catch::Approx(prof.b));
  REQUIRE(prof.f(0.0) == Catch::Approx(0.5 * prof.b));
  for (double rho = -0.9 * prof.epsilon; rho < 0.9 * prof.epsilon;
       rho += 0.1 * prof.epsilon)
    REQUIRE(prof.f_deriv(rho) > 0.0);
}

TEST_CASE("h vanishes near the zero section and is quadratic far out",
          "[action]") {
  ModelSystem torus = magnetic_torus(varying_field());
  CutoffProfile prof = build_profile(torus, 0.1, 3.0);
  VectorXd m(2);
  m << 0.3, -0.7;
  ModifiedHamiltonian hm = make_modified(torus, prof, m);

  VectorXd z0 = VectorXd::Zero(4);
  REQUIRE(hm.value(z0) == 0.0);
  REQUIRE(hm.gradient(z0).norm() == 0.0);

  // tangential plane stays inside the zero region (collar extension)
  for (double s : {0.5, 1.5, 3.0}) {
    VectorXd zt = VectorXd::Zero(4);
    zt[0] = s;
    zt[1] = -0.4 * s;
    REQUIRE(hm.value(zt) == 0.0);
    REQUIRE(hm.gradient(zt).norm() == 0.0);
  }

  VectorXd zq = VectorXd::Zero(4);
  zq[2] = 2.0 * prof.s_quad;
  zq[3] = -0.5 * prof.s_quad;
  double yn2 = zq.tail(2).squaredNorm();
  REQUIRE(hm.value(zq) == Catch::Approx(0.5 * prof.q * pi * yn2).margin(1e-14));
  VectorXd g = hm.gradient(zq);
  REQUIRE(g.head(2).norm() == 0.0);
  REQUIRE((g.tail(2) - prof.q * pi * zq.tail(2)).norm() < 1e-12);
}

TEST_CASE("h on the level set S_0 equals f(0) = b/2", "[action]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  ModifiedHamiltonian hm = make_modified(ho, prof, VectorXd());
  // bisection along a fibre ray for rho_hat = 0, i.e. H = eps^2
  double lo = 0.0, hi = prof.r;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    VectorXd z(2);
    z << mid, 0.0;
    (hm.rho_hat(z) < 0.0 ? lo : hi) = mid;
  }
  VectorXd z(2);
  z << 0.5 * (lo + hi), 0.0;
  double h = hm.value(z);
  REQUIRE(h == Catch::Approx(0.5 * prof.b).epsilon(1e-6));
  REQUIRE(h > 0.0);
  REQUIRE(h < prof.b);
}

TEST_CASE("h gradient matches finite differences", "[action]") {
  ModelSystem torus = magnetic_torus(varying_field());
  CutoffProfile prof = build_profile(torus, 0.1, 3.0);
  VectorXd m(2);
  m << 1.1, 0.4;
  ModifiedHamiltonian hm = make_modified(torus, prof, m);

  SplitMix64 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 800 && checked < 60; ++trial) {
    VectorXd z = rng.normal_vector(4);
    double scale = std::pow(10.0, rng.uniform(-1.3, 0.6));  // span the regions
    z *= scale * prof.gamma / z.norm();
    VectorXd g = hm.gradient(z);
    if (g.norm() < 1e-12) continue;  // flat regions carry no information
    // keep the FD stencil away from the C^2 region boundaries, where the
    // third derivative jumps and the oracle itself loses accuracy
    double rho = hm.rho_hat(z);
    double yn = z.tail(2).norm();
    if (std::abs(std::abs(rho) / prof.epsilon - 1.0) < 5e-3) continue;
    if (std::abs(yn - prof.r) < 1e-3 * prof.r) continue;
    if (std::abs(yn - prof.s_join) < 1e-3 * prof.s_join) continue;
    ++checked;
    const double h = 2e-6 * std::max(1.0, z.norm());
    for (int dir = 0; dir < 4; ++dir) {
      auto at = [&](double off) {
        VectorXd zs = z;
        zs[dir] += off;
        return hm.value(zs);
      };
      double fd = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
      REQUIRE(std::abs(fd - g[dir]) <= 1e-6 * std::max(1.0, g.norm()));
    }
  }
  REQUIRE(checked >= 30);
}

TEST_CASE("action of the zero loop and of small reference circles", "[action]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  ModifiedHamiltonian hm = make_modified(ho, prof, VectorXd());
  LoopGrid grid = LoopGrid::make(16, 66);

  FourierLoop zero = FourierLoop::zero(VectorXd(), 16, 1, 0);
  REQUIRE(eval_action(hm, zero, grid) == 0.0);

  // s e_N^+ with the samples inside the zero region: F = pi s^2 exactly
  for (double s : {0.01, 0.02, 0.03}) {
    FourierLoop z = s * e_N_plus(VectorXd(), 16, 1, 0);
    REQUIRE(eval_action(hm, z, grid) == Catch::Approx(pi * s * s).margin(1e-14));
  }
}

TEST_CASE("constant loops have nonpositive action", "[action]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  ModifiedHamiltonian hm = make_modified(ho, prof, VectorXd());
  LoopGrid grid = LoopGrid::make(8, 40);
  SplitMix64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    FourierLoop z = FourierLoop::zero(VectorXd(), 8, 1, 0);
    z.coeffs.col(z.col(0)) = 0.3 * rng.normal_vector(2);
    REQUIRE(eval_action(hm, z, grid) <= 0.0);
  }
}

TEST_CASE("fibre circles beyond r have nonpositive action", "[action]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  ModifiedHamiltonian hm = make_modified(ho, prof, VectorXd());
  LoopGrid grid = LoopGrid::make(8, 40);
  for (double R : {1.0 * prof.s_quad, 1.5 * prof.s_quad, 3.0 * prof.s_quad,
                   1.2 * prof.r}) {
    FourierLoop z = FourierLoop::zero(VectorXd(), 8, 1, 0);
    z.coeffs(0, z.col(1)) = R;
    REQUIRE(eval_action(hm, z, grid) <= 1e-12);
    // the paper's per-orbit bound at constant fibre radius
    REQUIRE(0.5 * prof.g_deriv(R) * R - prof.g(R) <= 1e-12);
  }
}

TEST_CASE("resonant scaling of the quadratic-tail gradient", "[action]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  LoopGrid grid = LoopGrid::make(8, 40);
  for (double q : {3.0, 2.0, 2.5}) {
    ModifiedHamiltonian hm = make_quadratic_tail(ho, q, VectorXd());
    FourierLoop z = FourierLoop::zero(VectorXd(), 8, 1, 0);
    z.coeffs(0, z.col(1)) = 0.7;
    FourierLoop g = grad_action_fibre(hm, z, grid);
    // gradient = (1 - q/2) z on a single k = 1 normal mode
    FourierLoop expected = (1.0 - 0.5 * q) * z;
    REQUIRE((g.coeffs - expected.coeffs).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("fibre gradient matches directional finite differences", "[action]") {
  ModelSystem torus = magnetic_torus(varying_field());
  CutoffProfile prof = build_profile(torus, 0.1, 3.0);
  LoopGrid grid = LoopGrid::make(12, 50);
  SplitMix64 rng(41);
  VectorXd m(2);
  m << 0.9, 0.2;
  ModifiedHamiltonian hm = make_modified(torus, prof, m);

  for (int trial = 0; trial < 10; ++trial) {
    FourierLoop z = random_loop(rng, m, 12, 2, 1, 0.6 * prof.gamma);
    double f0;
    FourierLoop g = grad_action_fibre(hm, z, grid, &f0);
    double gn = h_half_norm(g);
    for (int d = 0; d < 20; ++d) {
      FourierLoop v = random_loop(rng, m, 12, 2, 1, 1.0);
      v *= 1.0 / h_half_norm(v);
      double h = 3e-7;  // the cutoff's third derivative scales like eps^{-6}
      FourierLoop zp = z + h * v;
      FourierLoop zm = z - h * v;
      double fd = (eval_action(hm, zp, grid) - eval_action(hm, zm, grid)) /
                  (2.0 * h);
      REQUIRE(std::abs(fd - h_half_inner(g, v)) <= 1e-5 * std::max(gn, 1e-10));
    }
  }
}

TEST_CASE("base gradient: empty, symmetric, and stencil-checked", "[action]") {
  LoopGrid grid = LoopGrid::make(8, 40);

  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof_ho = build_profile(ho, 0.1, 3.0);
  FourierLoop zp = 0.5 * e_N_plus(VectorXd(), 8, 1, 0);
  REQUIRE(grad_action_base(ho, prof_ho, VectorXd(), zp, grid).size() == 0);

  ModelSystem flat = magnetic_torus(Fourier2::constant(1.0));
  CutoffProfile prof_flat = build_profile(flat, 0.1, 3.0);
  VectorXd m(2);
  m << 0.4, 1.3;
  SplitMix64 rng(51);
  FourierLoop z = random_loop(rng, m, 8, 2, 1, 0.08);
  VectorXd gb = grad_action_base(flat, prof_flat, m, z, grid);
  REQUIRE(gb.norm() < 1e-6);

  ModelSystem vary = magnetic_torus(varying_field());
  CutoffProfile prof_v = build_profile(vary, 0.1, 3.0);
  // a loop riding the active level band, where F genuinely depends on m
  double Bm = vary.magnetic.value(Vector2d(m[0], m[1]));
  double ystar = 0.1 / std::sqrt(Bm);
  FourierLoop zv = ystar * e_N_plus(m, 8, 2, 1);
  zv.coeffs.col(zv.col(-1)) += 0.01 * ystar * rng.normal_vector(4);
  zv.enforce_mean_zero();
  VectorXd g2 = grad_action_base(vary, prof_v, m, zv, grid);
  REQUIRE(g2.norm() > 1e-4);
  // 4th-order stencil oracle
  const double h = 1e-3;
  for (int i = 0; i < 2; ++i) {
    double f[4];
    int idx = 0;
    for (double off : {-2.0 * h, -h, h, 2.0 * h}) {
      VectorXd ms = m;
      ms[i] += off;
      FourierLoop zs = zv;
      zs.m = ms;
      f[idx++] = eval_action(make_modified(vary, prof_v, ms), zs, grid);
    }
    double fd4 = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
    REQUIRE(std::abs(fd4 - g2[i]) <= 1e-5 * std::max(1.0, std::abs(fd4)));
  }
}

TEST_CASE("construction inequality sweep", "[action]") {
  ModelSystem torus = magnetic_torus(varying_field());
  CutoffProfile prof = build_profile(torus, 0.1, 3.0);
  VectorXd m(2);
  m << 2.0, 5.0;
  ModifiedHamiltonian hm = make_modified(torus, prof, m);
  BoundsReport rep = verify_bounds(hm, 2000);
  REQUIRE(rep.u1_ok);
  REQUIRE(rep.u2_ok);
  REQUIRE(std::isfinite(rep.c1));
  REQUIRE(rep.c1 > 0.0);

  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof2 = build_profile(ho, 0.2, 3.0);
  ModifiedHamiltonian hm2 = make_modified(ho, prof2, VectorXd());
  REQUIRE_NOTHROW(verify_bounds(hm2, 2000));
  REQUIRE_THROWS_AS(verify_bounds(hm2, 10), ConfigError);
}

TEST_CASE("action scales quadratically on E+ near zero", "[action]") {
  // F(s z) = s^2 F(z) exactly while the loop stays in the zero region.
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  ModifiedHamiltonian hm = make_modified(ho, prof, VectorXd());
  LoopGrid grid = LoopGrid::make(8, 40);
  SplitMix64 rng(61);
  FourierLoop z = random_loop(rng, VectorXd(), 8, 1, 0, 1.0);
  z = project(z, LoopPart::E_plus);
  z *= 0.02 / h_half_norm(z);
  double f1 = eval_action(hm, z, grid);
  for (double s : {0.5, 0.25}) {
    double fs = eval_action(hm, s * z, grid);
    REQUIRE(fs == Catch::Approx(s * s * f1).margin(1e-15));
  }
}
