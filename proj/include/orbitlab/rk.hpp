#pragma once

// Adaptive Dormand-Prince 5(4) one-step integrator. This is the independent
// ODE oracle for orbit verification and deliberately shares no code with the
// spectral pipeline.

#include <functional>

#include "orbitlab/core.hpp"

namespace orbitlab {

struct IntegrationResult {
  VectorXd y;
  long steps = 0;
  long rejected = 0;
};

inline IntegrationResult integrate_dp54(
    const std::function<VectorXd(const VectorXd&)>& field, const VectorXd& y0,
    double T, double tol = 1e-10) {
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                      a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  IntegrationResult out;
  VectorXd y = y0;
  double t = 0.0;
  double h = T / 100.0;
  VectorXd k1 = field(y);
  const long max_steps = 2000000;

  while (t < T) {
    if (out.steps + out.rejected > max_steps)
      throw ConvergenceError("integrate_dp54: step limit exceeded");
    if (t + h > T) h = T - t;
    VectorXd k2 = field(y + h * (a21 * k1));
    VectorXd k3 = field(y + h * (a31 * k1 + a32 * k2));
    VectorXd k4 = field(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    VectorXd k5 = field(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    VectorXd k6 =
        field(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    VectorXd ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    VectorXd k7 = field(ynew);
    VectorXd err_v =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double sc = tol * (1.0 + y.cwiseAbs().maxCoeff());
    double err = err_v.cwiseAbs().maxCoeff() / sc;
    if (err <= 1.0) {
      t += h;
      y = ynew;
      k1 = k7;  // first-same-as-last
      ++out.steps;
    } else {
      ++out.rejected;
    }
    double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
    h *= std::clamp(fac, 0.2, 5.0);
    if (h < 1e-15 * std::max(1.0, T))
      throw ConvergenceError("integrate_dp54: step size underflow");
  }
  out.y = y;
  return out;
}

}  // namespace orbitlab
