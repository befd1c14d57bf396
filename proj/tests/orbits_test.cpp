#include <catch2/catch_amalgamated.hpp>

#include "orbitlab/orbits.hpp"
#include "orbitlab/systems.hpp"

using namespace orbitlab;

namespace {

// analytic Larmor circle for H = |p|^2, constant B, energy E, started at the
// phase point (0, 0, sqrt(E), 0)
MatrixXd larmor_circle(double B, double E, int N) {
  // xdot = -2p, pdot = -2B J2 p: p(t) = e^{-2B J2 t} p0, x = center - (J2 p)/B
  MatrixXd out(4, N);
  Vector2d p0(std::sqrt(E), 0.0);
  Matrix2d J2;
  J2 << 0, 1, -1, 0;
  Vector2d center = Vector2d(0, 0) + J2 * p0 / B;
  for (int j = 0; j < N; ++j) {
    double t = pi / B * j / N;
    double cth = std::cos(2.0 * B * t), sth = std::sin(2.0 * B * t);
    Matrix2d rot = cth * Matrix2d::Identity() - sth * J2;
    Vector2d p = rot * p0;
    Vector2d x = center - J2 * p / B;
    out.col(j) << x[0], x[1], p[0], p[1];
  }
  return out;
}

}  // namespace

TEST_CASE("larmor closed forms against the ODE oracle", "[orbits]") {
  struct Case {
    double B, E;
  };
  for (Case c : {Case{1.0, 1.0}, Case{2.0, 4.0}}) {
    LarmorReference ref = larmor_reference(c.B, c.E);
    REQUIRE(ref.radius == Catch::Approx(std::sqrt(c.E) / c.B));
    REQUIRE(ref.period == Catch::Approx(pi / c.B));
    REQUIRE(ref.speed == Catch::Approx(2.0 * std::sqrt(c.E)));

    ModelSystem sys = magnetic_torus(Fourier2::constant(c.B));
    auto field = [&sys](const VectorXd& z) {
      return hamiltonian_field(sys, z);
    };
    VectorXd z0(4);
    z0 << 0.0, 0.0, std::sqrt(c.E), 0.0;
    // closes after one reference period
    IntegrationResult res = integrate_dp54(field, z0, ref.period, 1e-12);
    REQUIRE((res.y - z0).norm() < 1e-9);
    // radius from the circle geometry: |x(t) - center| with the center a
    // quarter turn from the start
    IntegrationResult quarter =
        integrate_dp54(field, z0, ref.period / 2.0, 1e-12);
    double diameter = (quarter.y.head(2) - z0.head(2)).norm();
    REQUIRE(diameter == Catch::Approx(2.0 * ref.radius).epsilon(1e-9));
  }
  // radius -> 0 linearly in sqrt(E)
  REQUIRE(larmor_reference(1.0, 1e-8).radius == Catch::Approx(1e-4));
  REQUIRE_THROWS_AS(larmor_reference(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("verify_orbit: exact circle closes, perturbed start does not",
          "[orbits]") {
  const double B = 1.0, E = 0.25;
  ModelSystem sys = magnetic_torus(Fourier2::constant(B));
  PeriodicOrbit orb;
  orb.samples = larmor_circle(B, E, 128);
  // reversed orientation: verify_orbit expects samples ordered against the
  // physical flow, so flip the analytic circle
  MatrixXd flipped(4, 128);
  flipped.col(0) = orb.samples.col(0);
  for (int j = 1; j < 128; ++j) flipped.col(j) = orb.samples.col(128 - j);
  orb.samples = flipped;
  orb.period_phys = pi / B;
  OrbitCheck chk = verify_orbit(sys, orb, 1e-11);
  REQUIRE(chk.closure < 1e-8);
  REQUIRE(chk.max_distance < 1e-8);

  // negative controls: the oracle discriminates wrong orbits. A kicked
  // start lands on a different circle (constant-B flows are isochronous, so
  // it still closes; the parametric distance catches it), and a wrong
  // period breaks closure.
  PeriodicOrbit bad = orb;
  bad.samples.col(0)[2] += 1e-3;
  OrbitCheck chk2 = verify_orbit(sys, bad, 1e-11);
  REQUIRE(chk2.max_distance > 1e-4);
  PeriodicOrbit wrong_period = orb;
  wrong_period.period_phys *= 1.001;
  OrbitCheck chk3 = verify_orbit(sys, wrong_period, 1e-11);
  REQUIRE(chk3.closure > 1e-4);
}

TEST_CASE("pipeline orbit on the harmonic oscillator", "[orbits]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  const double eps = 0.1;
  CutoffProfile prof = build_profile(ho, eps, 3.0);
  LoopGrid grid = LoopGrid::make(16, 66);
  LinkingConfig cfg = choose_parameters(ho, prof, VectorXd(), grid);
  SearchOptions opt;
  opt.budget = 40000;
  SearchResult res = minimax_search(ho, prof, cfg, VectorXd(), grid, opt);
  REQUIRE(res.converged);

  PeriodicOrbit orb = loop_to_orbit(ho, prof, res.candidate, grid);
  REQUIRE(orb.action > 0.0);
  REQUIRE(std::abs(orb.rho) <= eps);
  REQUIRE(orb.energy_max_dev <= 1e-6 * eps * eps);
  REQUIRE(orb.ode_residual < 1e-8);
  REQUIRE(orb.lambda_spread < 1e-6);
  REQUIRE(orb.decay_zeta < 1.0);

  // the orbit is the circle of radius sqrt(energy) for H = |z|^2
  double expected_radius = std::sqrt(orb.energy);
  for (int j = 0; j < orb.samples.cols(); ++j)
    REQUIRE(orb.samples.col(j).norm() ==
            Catch::Approx(expected_radius).epsilon(1e-6));

  OrbitCheck chk = verify_orbit(ho, orb, 1e-11);
  REQUIRE(chk.closure <= 1e-6);
  REQUIRE(orb.closure_residual == chk.closure);

  // period: H = |z|^2 has X_H period pi at every level
  REQUIRE(orb.period_phys == Catch::Approx(pi).epsilon(1e-6));
}

TEST_CASE("nonpositive-action candidates are rejected", "[orbits]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  LoopGrid grid = LoopGrid::make(8, 40);
  CriticalCandidate cand;
  cand.m = VectorXd();
  cand.z = FourierLoop::zero(VectorXd(), 8, 1, 0);
  cand.z.coeffs(0, cand.z.col(0)) = 0.1;  // constant loop
  cand.value = -0.01;                     // action <= 0 upstream
  cand.grad_norm = 0.0;
  REQUIRE_THROWS_AS(loop_to_orbit(ho, prof, cand, grid), VerificationError);
}

TEST_CASE("unpolished candidates are rejected", "[orbits]") {
  ModelSystem ho = point_quadratic(1, {1.0});
  CutoffProfile prof = build_profile(ho, 0.1, 3.0);
  LoopGrid grid = LoopGrid::make(8, 40);
  CriticalCandidate cand;
  cand.m = VectorXd();
  cand.z = 0.05 * e_N_plus(VectorXd(), 8, 1, 0);
  cand.value = 0.01;
  cand.grad_norm = 1e-3;
  REQUIRE_THROWS_AS(loop_to_orbit(ho, prof, cand, grid), VerificationError);
}
