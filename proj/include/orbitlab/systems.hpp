#pragma once

// Built-in test systems: quadratic extrema at a point and symplectic
// magnetic flows on flat tori.

#include "orbitlab/geometry.hpp"

namespace orbitlab {

// H(z) = sum_i a_i (z_i^2 + z_{i+n}^2) + quartic |z|^4 + cubic z_1^3 on
// (R^{2n}, Omega standard). M = {0}.
inline ModelSystem point_quadratic(int n, std::vector<double> coeffs,
                                   double quartic = 0.0, double cubic = 0.0) {
  if (int(coeffs.size()) == 0) coeffs.assign(std::size_t(n), 1.0);
  if (int(coeffs.size()) != n)
    throw ConfigError("point_quadratic: need n frequency coefficients");
  for (double a : coeffs)
    if (a <= 0.0) throw ConfigError("point_quadratic: coefficients must be positive");

  ModelSystem sys;
  sys.n = n;
  sys.l = 0;
  sys.base_kind = ModelSystem::BaseKind::Point;
  sys.name = "point-quadratic";
  const int dim = 2 * n;

  MatrixXd omega = MatrixXd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    omega(i, n + i) = 1.0;
    omega(n + i, i) = -1.0;
  }
  sys.symplectic_form = [omega](const VectorXd&) { return omega; };

  sys.hamiltonian = [n, coeffs, quartic, cubic](const VectorXd& z) {
    double h = 0.0;
    for (int i = 0; i < n; ++i)
      h += coeffs[std::size_t(i)] * (z[i] * z[i] + z[n + i] * z[n + i]);
    if (quartic != 0.0) {
      double r2 = z.squaredNorm();
      h += quartic * r2 * r2;
    }
    if (cubic != 0.0) h += cubic * z[0] * z[0] * z[0];
    return h;
  };
  sys.grad_hamiltonian = [n, coeffs, quartic, cubic](const VectorXd& z) {
    VectorXd g(z.size());
    for (int i = 0; i < n; ++i) {
      g[i] = 2.0 * coeffs[std::size_t(i)] * z[i];
      g[n + i] = 2.0 * coeffs[std::size_t(i)] * z[n + i];
    }
    if (quartic != 0.0) g += 4.0 * quartic * z.squaredNorm() * z;
    if (cubic != 0.0) g[0] += 3.0 * cubic * z[0] * z[0];
    return g;
  };
  return sys;
}

// Kinetic-energy Hamiltonian H = ||p||^2_{g^{-1}} on T*T^2 with the twisted
// form d lambda + pi^* omega, omega = B(x) dx1 ^ dx2. Symplectic iff B != 0.
inline ModelSystem magnetic_torus(Fourier2 B, TorusMetric metric = {}) {
  ModelSystem sys;
  sys.n = 2;
  sys.l = 1;
  sys.base_kind = ModelSystem::BaseKind::FlatTorus;
  sys.name = "magnetic-torus";
  sys.magnetic = B;
  sys.metric = metric;

  sys.symplectic_form = [B](const VectorXd& z) {
    MatrixXd om = MatrixXd::Zero(4, 4);
    double b = B.value(Vector2d(z[0], z[1]));
    om(0, 1) = b;
    om(1, 0) = -b;
    om(0, 2) = -1.0;
    om(2, 0) = 1.0;
    om(1, 3) = -1.0;
    om(3, 1) = 1.0;
    return om;
  };

  if (metric.is_identity()) {
    sys.hamiltonian = [](const VectorXd& z) {
      return z[2] * z[2] + z[3] * z[3];
    };
    sys.grad_hamiltonian = [](const VectorXd& z) {
      VectorXd g = VectorXd::Zero(4);
      g[2] = 2.0 * z[2];
      g[3] = 2.0 * z[3];
      return g;
    };
  } else {
    sys.hamiltonian = [metric](const VectorXd& z) {
      Vector2d x(z[0], z[1]), p(z[2], z[3]);
      return p.dot(metric.inverse(x) * p);
    };
    sys.grad_hamiltonian = [metric](const VectorXd& z) {
      Vector2d x(z[0], z[1]), p(z[2], z[3]);
      Matrix2d gi = metric.inverse(x);
      VectorXd g(4);
      for (int k = 0; k < 2; ++k) {
        Matrix2d dgi = -gi * metric.dvalue(x, k) * gi;
        g[k] = p.dot(dgi * p);
      }
      Vector2d gp = 2.0 * gi * p;
      g[2] = gp[0];
      g[3] = gp[1];
      return g;
    };
  }
  return sys;
}

}  // namespace orbitlab
