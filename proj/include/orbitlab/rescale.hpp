#pragma once

// Fibre rescaling: the dilated field X_eps, its fibrewise linear limit X_0,
// and symplectic (Williamson) eigenvalue extraction.

#include <algorithm>

#include "orbitlab/geometry.hpp"

namespace orbitlab {

struct RescaledField {
  double epsilon = 0.0;
  // velocity at combined chart coordinates z = (x, y)
  std::function<VectorXd(const VectorXd&)> evaluator;
};

struct LimitField {
  MatrixXd L;  // acts on normal coordinates; tangential component is zero

  VectorXd apply(const VectorXd& z) const {
    const int nd = int(L.rows());
    VectorXd r = VectorXd::Zero(z.size());
    r.tail(nd) = L * z.tail(nd);
    return r;
  }
};

struct SymplecticSpectrum {
  VectorXd m;
  std::vector<double> values;  // a_1 <= ... <= a_{n-l}
};

// X_eps = -Omega~_eps^{-1} d(eps^{-2} Phi* H), with Phi the chart composed
// with the fibre dilation and Omega~_eps assembled from the chart
// differential. Combined coordinates throughout.
inline RescaledField rescaled_field(const ModelSystem& sys,
                                    const TangentFrame& frame,
                                    const DarbouxChart& chart, double eps) {
  if (eps <= 0.0) throw ConfigError("rescaled_field: epsilon must be positive");
  RescaledField rf;
  rf.epsilon = eps;
  const int nd = frame.normal_dim();
  const int dim = frame.dim();
  const ModelSystem* sp = &sys;
  TangentFrame fr = frame;
  DarbouxChart ch = chart;
  rf.evaluator = [sp, fr, ch, eps, nd, dim](const VectorXd& z) {
    VectorXd zs = z;
    zs.tail(nd) *= eps;
    VectorXd w = fr.combined * zs;
    if (w.norm() > ch.chart_radius)
      throw ChartEscapeError("rescaled_field: dilated point leaves the chart");
    VectorXd phi = ch.map(w);
    MatrixXd D = ch.differential(w);
    MatrixXd DC = D * fr.combined;

    VectorXd grad_s = DC.transpose() * sp->grad_h(phi);  // d(H o Phi o C)/d zs
    VectorXd grad_z = grad_s / (eps * eps);
    grad_z.tail(nd) *= eps;

    MatrixXd om = DC.transpose() * sp->symplectic_form(phi) * DC;
    MatrixXd om_eps = om / (eps * eps);
    om_eps.rightCols(nd) *= eps;
    om_eps.bottomRows(nd) *= eps;
    (void)dim;
    return VectorXd(-(om_eps.inverse() * grad_z));
  };
  return rf;
}

// i_{X_0} Omega^N = d^N Q with Q(y) = y^T S y: L = -(Omega^N)^{-1} 2S, which
// in the standard frame block is Omega^N * 2S. Eigenvalues +-2 a_i i.
inline LimitField limit_field(const TangentFrame& frame, const MatrixXd& S) {
  LimitField lf;
  lf.L = frame.omega_N * (2.0 * S);
  return lf;
}

inline LimitField limit_field(const ModelSystem& sys, const VectorXd& m) {
  TangentFrame fr = build_frame(sys, m);
  DarbouxChart ch = darboux_chart(sys, m);
  return limit_field(fr, normal_hessian(sys, ch, fr));
}

// Williamson invariants of Q(y) = y^T S y with respect to omega_N: half the
// moduli of the eigenvalues of omega_N^{-1} (2S), sorted ascending. Kept as
// the plain nonsymmetric eigenproblem; dimensions here are tiny.
inline std::vector<double> symplectic_eigenvalues(const MatrixXd& omega_N,
                                                  const MatrixXd& S) {
  const int d = int(omega_N.rows());
  if (S.rows() != d || S.cols() != d)
    throw std::invalid_argument("symplectic_eigenvalues: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<MatrixXd> sd(0.5 * (S + S.transpose()));
  if (sd.eigenvalues().minCoeff() <= 0.0)
    throw GeometryError("symplectic_eigenvalues: S not positive definite");

  Eigen::EigenSolver<MatrixXd> es(omega_N.inverse() * (2.0 * S));
  std::vector<double> mods(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) mods[std::size_t(i)] = std::abs(es.eigenvalues()[i]);
  std::sort(mods.begin(), mods.end());
  std::vector<double> a;
  for (int i = 0; i < d; i += 2) {
    double lo = mods[std::size_t(i)], hi = mods[std::size_t(i + 1)];
    if (hi - lo > 1e-8 * std::max(1.0, hi))
      throw GeometryError("symplectic_eigenvalues: eigenvalues failed to pair");
    a.push_back(0.25 * (lo + hi));
  }
  return a;
}

inline SymplecticSpectrum spectrum_at(const ModelSystem& sys, const VectorXd& m) {
  TangentFrame fr = build_frame(sys, m);
  DarbouxChart ch = darboux_chart(sys, m);
  MatrixXd S = normal_hessian(sys, ch, fr);
  SymplecticSpectrum sp;
  sp.m = m;
  sp.values = symplectic_eigenvalues(fr.omega_N, S);
  return sp;
}

// sup |X_eps - X_0| in the g_J(m) norm over a fixed deterministic grid on
// the unit ball of the normal fibre at the chart center. X_0 is fibrewise,
// so the probe stays on the x = 0 slice.
inline std::vector<double> convergence_probe(const ModelSystem& sys,
                                             const VectorXd& m,
                                             const std::vector<double>& eps_list,
                                             int grid_points = 64) {
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]) || eps_list[i] <= 0.0)
      throw ConfigError("convergence_probe: epsilon list must be positive decreasing");
  TangentFrame fr = build_frame(sys, m);
  DarbouxChart ch = darboux_chart(sys, m);
  MatrixXd S = normal_hessian(sys, ch, fr);
  LimitField lf = limit_field(fr, S);
  const int nd = fr.normal_dim();
  const int dim = fr.dim();

  std::vector<VectorXd> grid;
  for (int i = 0; i < grid_points; ++i) {
    VectorXd z = VectorXd::Zero(dim);
    z.tail(nd) = halton_ball_point(std::size_t(i), nd);
    grid.push_back(z);
  }

  std::vector<double> deviations;
  for (double eps : eps_list) {
    RescaledField rf = rescaled_field(sys, fr, ch, eps);
    double worst = 0.0;
    for (const auto& z : grid)
      worst = std::max(worst, (rf.evaluator(z) - lf.apply(z)).norm());
    deviations.push_back(worst);
  }
  return deviations;
}

}  // namespace orbitlab
