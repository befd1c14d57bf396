#pragma once

// From critical loops to verified periodic orbits of the original flow:
// chart mapping, energy-level identification inside the rho-band, period
// recovery through the gradient ratio, and independent ODE verification.

#include "orbitlab/minimax.hpp"
#include "orbitlab/rk.hpp"

namespace orbitlab {

struct PeriodicOrbit {
  VectorXd m;
  FourierLoop loop;
  MatrixXd samples;  // 2n x N_t ambient phase points along the loop
  double epsilon = 0.0;
  double energy = 0.0;          // mean of H along the samples
  double energy_max_dev = 0.0;  // max |H - mean|
  double rho = 0.0;             // H = eps^2 + rho eps^2/4
  double period_phys = 0.0;     // period of the X_H orbit
  double lambda_spread = 0.0;   // relative spread of the gradient ratio
  double action = 0.0;
  double ode_residual = 0.0;      // loop velocity vs the h_m field
  double closure_residual = -1.0; // |z(T) - z(0)| from verify_orbit
  double max_distance = -1.0;     // parametric deviation from verify_orbit
  double decay_zeta = 0.0;        // Fourier decay |z_k| <~ C zeta^|k|
};

struct LarmorReference {
  double radius = 0.0;
  double period = 0.0;
  double speed = 0.0;
  double angular_frequency = 0.0;
};

// Closed forms for H = |p|^2 on the flat torus with omega = B dx1 ^ dx2.
inline LarmorReference larmor_reference(double B, double E) {
  if (B <= 0.0 || E <= 0.0)
    throw std::invalid_argument("larmor_reference: need B > 0 and E > 0");
  LarmorReference ref;
  ref.speed = 2.0 * std::sqrt(E);
  ref.angular_frequency = 2.0 * B;
  ref.radius = std::sqrt(E) / B;
  ref.period = pi / B;
  return ref;
}

// The ambient Hamiltonian field Omega(X_H, .) = dH.
inline VectorXd hamiltonian_field(const ModelSystem& sys, const VectorXd& z) {
  return VectorXd(-sys.symplectic_form(z).inverse() * sys.grad_h(z));
}

inline PeriodicOrbit loop_to_orbit(const ModelSystem& sys,
                                   const CutoffProfile& prof,
                                   const CriticalCandidate& cand,
                                   const LoopGrid& grid,
                                   double grad_tol = 1e-8) {
  if (cand.grad_norm > grad_tol)
    throw VerificationError("loop_to_orbit: candidate not polished (grad " +
                            std::to_string(cand.grad_norm) + ")");
  if (!(cand.value > 0.0))
    throw VerificationError(
        "loop_to_orbit: candidate action is not positive; no orbit "
        "correspondence");

  ModifiedHamiltonian hm = make_modified(sys, prof, cand.m);
  const int Nt = grid.Nt;
  const int nd = hm.ndim(), td = hm.tdim();

  PeriodicOrbit orb;
  orb.m = cand.m;
  orb.loop = cand.z;
  orb.epsilon = prof.epsilon;
  orb.action = cand.value;

  MatrixXd zs = synthesize(cand.z, grid);

  // chart containment: the loop must stay in the region governed by the
  // interior level parameter, clear of the collar and the chart edge
  for (int j = 0; j < Nt; ++j) {
    double xn = td > 0 ? zs.col(j).head(td).norm() : 0.0;
    if (xn >= prof.collar_x || zs.col(j).norm() >= 0.9 * sys.chart_radius)
      throw ChartEscapeError(
          "loop_to_orbit: extended-hypersurface escape (loop leaves the "
          "chart's interior region)");
  }

  // the loop must solve zdot = J grad h_m (the action principle's field)
  FourierLoop zdot = FourierLoop::zero(cand.m, grid.K, sys.n, sys.l);
  for (int k = -grid.K; k <= grid.K; ++k)
    zdot.coeffs.col(zdot.col(k)) =
        two_pi * k * cand.z.j_apply(cand.z.coeffs.col(cand.z.col(k)));
  MatrixXd vs = synthesize(zdot, grid);
  double ode_res = 0.0;
  for (int j = 0; j < Nt; ++j) {
    VectorXd field = cand.z.j_apply(hm.gradient(zs.col(j)));
    ode_res = std::max(ode_res, (vs.col(j) - field).norm());
  }
  orb.ode_residual = ode_res;

  // map to phase space and measure the energy level
  orb.samples.resize(sys.dim(), Nt);
  VectorXd energies(Nt);
  for (int j = 0; j < Nt; ++j) {
    orb.samples.col(j) = hm.chart.map(hm.frame.combined * zs.col(j));
    energies[j] = sys.hamiltonian(orb.samples.col(j));
  }
  orb.energy = energies.mean();
  orb.energy_max_dev = (energies.array() - orb.energy).abs().maxCoeff();
  const double e2 = prof.epsilon * prof.epsilon;
  orb.rho = (orb.energy - e2) * 4.0 / e2;
  if (std::abs(orb.rho) > prof.epsilon * (1.0 + 1e-6))
    throw VerificationError("loop_to_orbit: level offset rho = " +
                            std::to_string(orb.rho) + " outside [-eps, eps]");

  // period through the gradient ratio grad(H o Phi) = lambda grad h_m
  double lam_min = std::numeric_limits<double>::infinity(), lam_max = 0.0,
         lam_sum = 0.0;
  for (int j = 0; j < Nt; ++j) {
    VectorXd gh = hm.gradient(zs.col(j));
    VectorXd gH = hm.grad_level_H(zs.col(j));
    double lam = gH.dot(gh) / gh.squaredNorm();
    lam_min = std::min(lam_min, lam);
    lam_max = std::max(lam_max, lam);
    lam_sum += lam;
  }
  double lam_mean = lam_sum / Nt;
  orb.period_phys = 1.0 / lam_mean;
  orb.lambda_spread = (lam_max - lam_min) / std::abs(lam_mean);

  // Fourier decay of the critical loop (smoothness proxy)
  {
    std::vector<double> ks, logs;
    for (int k = 1; k <= grid.K; ++k) {
      double ck = std::max(cand.z.coeffs.col(cand.z.col(k)).norm(),
                           cand.z.coeffs.col(cand.z.col(-k)).norm());
      if (ck > 1e-15) {
        ks.push_back(double(k));
        logs.push_back(std::log(ck));
      }
    }
    if (ks.size() >= 3) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < ks.size(); ++i) {
        sx += ks[i];
        sy += logs[i];
        sxx += ks[i] * ks[i];
        sxy += ks[i] * logs[i];
      }
      double nn = double(ks.size());
      double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
      orb.decay_zeta = std::exp(slope);
    }
  }
  return orb;
}

struct OrbitCheck {
  double closure = 0.0;
  double max_distance = 0.0;
  long steps = 0;
};

// Independent verification: integrate zdot = X_H(z) from samples[0] over one
// recovered period with the Dormand-Prince oracle. The loop traverses the
// orbit with reversed orientation (see the geometry conventions), so the
// physical trajectory is compared against the sample sequence run backwards.
inline OrbitCheck verify_orbit(const ModelSystem& sys, PeriodicOrbit& orbit,
                               double integrator_tol = 1e-10,
                               int compare_points = 32) {
  auto field = [&sys](const VectorXd& z) { return hamiltonian_field(sys, z); };
  const int Nt = int(orbit.samples.cols());
  OrbitCheck chk;
  VectorXd y = orbit.samples.col(0);
  const double T = orbit.period_phys;
  int stride = std::max(1, Nt / compare_points);
  int last_idx = 0;
  for (int j = stride; j <= Nt; j += stride) {
    int steps_ahead = std::min(j, Nt) - last_idx;
    IntegrationResult seg =
        integrate_dp54(field, y, T * steps_ahead / Nt, integrator_tol);
    chk.steps += seg.steps;
    y = seg.y;
    last_idx = std::min(j, Nt);
    int sample_idx = (Nt - last_idx) % Nt;  // reversed orientation
    chk.max_distance =
        std::max(chk.max_distance, (y - orbit.samples.col(sample_idx)).norm());
  }
  if (last_idx != Nt) {
    IntegrationResult seg =
        integrate_dp54(field, y, T * (Nt - last_idx) / Nt, integrator_tol);
    chk.steps += seg.steps;
    y = seg.y;
  }
  chk.closure = (y - orbit.samples.col(0)).norm();
  orbit.closure_residual = chk.closure;
  orbit.max_distance = chk.max_distance;
  return chk;
}

}  // namespace orbitlab
