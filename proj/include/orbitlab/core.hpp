#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace orbitlab {

using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// Error taxonomy; the CLI maps these onto its exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ChartEscapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VerificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic 64-bit generator (splitmix64). Used instead of <random>
// engines so that runs are bit-reproducible across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1).
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  // Uniform in [a,b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller (both values used alternately).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  VectorXd normal_vector(int dim) {
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Radical-inverse Halton sequence; low-discrepancy deterministic sampling.
inline double halton(std::size_t index, unsigned base) {
  double f = 1.0, r = 0.0;
  std::size_t i = index + 1;  // skip the all-zeros point
  while (i > 0) {
    f /= double(base);
    r += f * double(i % base);
    i /= base;
  }
  return r;
}

inline const std::vector<unsigned>& halton_primes() {
  static const std::vector<unsigned> primes = {
      2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,  37,  41,  43,  47,  53,
      59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131,
      137, 139, 149, 151, 157, 163, 167, 173};
  return primes;
}

// Point of the d-dimensional Halton sequence in [0,1)^d.
inline VectorXd halton_point(std::size_t index, int dim) {
  const auto& primes = halton_primes();
  if (dim > int(primes.size()))
    throw std::invalid_argument("halton_point: dimension too large");
  VectorXd p(dim);
  for (int j = 0; j < dim; ++j) p[j] = halton(index, primes[std::size_t(j)]);
  return p;
}

// Halton point mapped to the unit ball of dimension dim (radius scaling
// preserves the low-discrepancy property well enough for our sampling).
inline VectorXd halton_ball_point(std::size_t index, int dim) {
  VectorXd u = halton_point(index, dim + 1);
  VectorXd dir(dim);
  // inverse-normal-free direction via spherical angles would be clumsy in
  // general dim; use Box-Muller on pairs of Halton coordinates instead.
  for (int j = 0; j < dim; ++j) {
    double a = std::max(u[j], 1e-12);
    double b = halton(index, halton_primes()[std::size_t((j + 7) % 16)]);
    dir[j] = std::sqrt(-2.0 * std::log(a)) * std::cos(two_pi * b);
  }
  double nrm = dir.norm();
  if (nrm < 1e-12) {
    dir.setZero();
    dir[0] = 1.0;
    nrm = 1.0;
  }
  double radius = std::pow(u[dim], 1.0 / double(dim));
  return (radius / nrm) * dir;
}

// Quintic smoothstep: 0 for u<=0, 1 for u>=1, C^2 across both ends.
inline double smoothstep5(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

inline double smoothstep5_deriv(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  double v = u * (1.0 - u);
  return 30.0 * v * v;
}

struct QuadratureRule {
  std::vector<double> nodes;    // in (0,1)
  std::vector<double> weights;  // for the stated weight function
};

namespace detail {

// Golub-Welsch on the monic Jacobi recurrence for weight (1-x)^a (1+x)^b
// on [-1,1], mapped to [0,1].
inline QuadratureRule jacobi_rule01(int order, double a, double b) {
  const int n = order;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  auto alpha = [&](int k) {
    if (k == 0) return (b - a) / (a + b + 2.0);
    double s = 2.0 * k + a + b;
    return (b * b - a * a) / (s * (s + 2.0));
  };
  auto beta = [&](int k) {
    double s = 2.0 * k + a + b;
    return 4.0 * k * (k + a) * (k + b) * (k + a + b) /
           (s * s * (s + 1.0) * (s - 1.0));
  };
  for (int k = 0; k < n; ++k) {
    T(k, k) = alpha(k);
    if (k > 0) {
      double off = std::sqrt(beta(k));
      T(k, k - 1) = off;
      T(k - 1, k) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  double mu0 = std::pow(2.0, a + b + 1.0) * std::tgamma(a + 1.0) *
               std::tgamma(b + 1.0) / std::tgamma(a + b + 2.0);
  QuadratureRule rule;
  rule.nodes.resize(std::size_t(n));
  rule.weights.resize(std::size_t(n));
  for (int k = 0; k < n; ++k) {
    double x = es.eigenvalues()[k];
    double w = mu0 * es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
    rule.nodes[std::size_t(k)] = 0.5 * (x + 1.0);
    rule.weights[std::size_t(k)] = w;
  }
  return rule;
}

}  // namespace detail

// Gauss rule for  int_0^1 f(s) ds  (Legendre).
inline const QuadratureRule& gauss01(int order) {
  static std::vector<QuadratureRule> cache(33);
  if (order < 1 || order > 32) throw std::invalid_argument("gauss01 order");
  auto& rule = cache[std::size_t(order)];
  if (rule.nodes.empty()) {
    rule = detail::jacobi_rule01(order, 0.0, 0.0);
    for (auto& w : rule.weights) w *= 0.5;  // mu0=2 on [-1,1], interval maps by 1/2
  }
  return rule;
}

// Gauss rule for  int_0^1 s f(s) ds  (weight s; exact for f of degree
// 2*order-1). Order 1 gives node 2/3, weight 1/2.
inline const QuadratureRule& gauss01_weight_s(int order) {
  static std::vector<QuadratureRule> cache(33);
  if (order < 1 || order > 32)
    throw std::invalid_argument("gauss01_weight_s order");
  auto& rule = cache[std::size_t(order)];
  if (rule.nodes.empty()) {
    // weight s on [0,1] is (1+x)/4 on [-1,1] after s=(1+x)/2, ds=dx/2.
    rule = detail::jacobi_rule01(order, 0.0, 1.0);
    for (auto& w : rule.weights) w *= 0.25;
  }
  return rule;
}

// Least-squares slope of log(y) against log(x); used by the scaling tests.
inline double log_log_slope(const std::vector<double>& x,
                            const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double d = double(n) * sxx - sx * sx;
  return (double(n) * sxy - sx * sy) / d;
}

}  // namespace orbitlab
