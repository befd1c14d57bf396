#pragma once

// Truncated Fourier loops in T_mW over a frame's combined basis:
//   z(t) = sum_{|k| <= K} e^{2 pi k J(m) t} z_k,   tangential mean zero.
// The frame basis is unitary (g~ = I), so the H^{1/2} inner product
//   <z,w> = z_0.w_0 + 2 pi sum |k| z_k.w_k
// is Euclidean on coefficients and e^{theta J~} = cos(theta) I + sin(theta) J~.

#include "orbitlab/geometry.hpp"

namespace orbitlab {

enum class LoopPart { E_minus, E_zero, E_plus, E_T, E_N };

struct FourierLoop {
  VectorXd m;      // base coordinates (2l)
  int K = 0;       // truncation order
  int n = 1, l = 0;
  MatrixXd coeffs;  // dim x (2K+1); column j holds z_{j-K}

  int dim() const { return 2 * n; }
  int tdim() const { return 2 * l; }
  int col(int k) const { return k + K; }

  static FourierLoop zero(const VectorXd& m, int K, int n, int l) {
    FourierLoop z;
    z.m = m;
    z.K = K;
    z.n = n;
    z.l = l;
    z.coeffs = MatrixXd::Zero(2 * n, 2 * K + 1);
    return z;
  }

  // blockwise [[0,-I],[I,0]] on combined coordinates
  VectorXd j_apply(const VectorXd& v) const {
    VectorXd r(v.size());
    block(v, r, 0, l);
    block(v, r, 2 * l, n - l);
    return r;
  }

  void enforce_mean_zero() {
    for (int i = 0; i < tdim(); ++i) coeffs(i, col(0)) = 0.0;
  }

  FourierLoop& operator+=(const FourierLoop& o) {
    coeffs += o.coeffs;
    return *this;
  }
  FourierLoop& operator-=(const FourierLoop& o) {
    coeffs -= o.coeffs;
    return *this;
  }
  FourierLoop& operator*=(double s) {
    coeffs *= s;
    return *this;
  }
  friend FourierLoop operator+(FourierLoop a, const FourierLoop& b) {
    a += b;
    return a;
  }
  friend FourierLoop operator-(FourierLoop a, const FourierLoop& b) {
    a -= b;
    return a;
  }
  friend FourierLoop operator*(double s, FourierLoop a) {
    a *= s;
    return a;
  }

 private:
  static void block(const VectorXd& v, VectorXd& r, int off, int half) {
    for (int i = 0; i < half; ++i) {
      r[off + i] = -v[off + half + i];
      r[off + half + i] = v[off + i];
    }
  }
};

struct LoopNorms {
  double h_half = 0.0;
  double l2 = 0.0;
};

inline void check_compatible(const FourierLoop& z, const FourierLoop& w) {
  if (z.K != w.K || z.n != w.n || z.l != w.l)
    throw std::invalid_argument("loops: truncation/dimension mismatch");
  if (z.m.size() != w.m.size() || (z.m - w.m).norm() > 1e-12)
    throw std::invalid_argument("loops: base-point mismatch");
}

inline double h_half_inner(const FourierLoop& z, const FourierLoop& w) {
  check_compatible(z, w);
  double acc = z.coeffs.col(z.col(0)).dot(w.coeffs.col(w.col(0)));
  for (int k = 1; k <= z.K; ++k) {
    acc += two_pi * k *
           (z.coeffs.col(z.col(k)).dot(w.coeffs.col(w.col(k))) +
            z.coeffs.col(z.col(-k)).dot(w.coeffs.col(w.col(-k))));
  }
  return acc;
}

inline double h_half_norm(const FourierLoop& z) {
  return std::sqrt(h_half_inner(z, z));
}

// True L^2 norm (Parseval): consistent with time-domain quadrature.
inline double l2_norm(const FourierLoop& z) {
  return std::sqrt(z.coeffs.squaredNorm());
}

inline LoopNorms loop_norms(const FourierLoop& z) {
  return {h_half_norm(z), l2_norm(z)};
}

inline FourierLoop project(const FourierLoop& z, LoopPart part) {
  FourierLoop r = z;
  switch (part) {
    case LoopPart::E_minus:
      for (int k = 0; k <= z.K; ++k) r.coeffs.col(r.col(k)).setZero();
      break;
    case LoopPart::E_zero:
      for (int k = 1; k <= z.K; ++k) {
        r.coeffs.col(r.col(k)).setZero();
        r.coeffs.col(r.col(-k)).setZero();
      }
      break;
    case LoopPart::E_plus:
      for (int k = -z.K; k <= 0; ++k) r.coeffs.col(r.col(k)).setZero();
      break;
    case LoopPart::E_T:
      r.coeffs.bottomRows(2 * (z.n - z.l)).setZero();
      break;
    case LoopPart::E_N:
      r.coeffs.topRows(2 * z.l).setZero();
      break;
  }
  return r;
}

// Shared cos/sin tables for a fixed (K, N_t) discretization.
struct LoopGrid {
  int K = 0;
  int Nt = 0;
  MatrixXd cosT, sinT;  // Nt x (K+1), entry (j,k) = trig(2 pi k j / Nt)

  static LoopGrid make(int K, int Nt) {
    if (Nt < 2 * (2 * K + 1))
      throw ConfigError("LoopGrid: undersampled grid (need Nt >= 2(2K+1))");
    LoopGrid g;
    g.K = K;
    g.Nt = Nt;
    g.cosT.resize(Nt, K + 1);
    g.sinT.resize(Nt, K + 1);
    for (int j = 0; j < Nt; ++j)
      for (int k = 0; k <= K; ++k) {
        double ph = two_pi * k * j / double(Nt);
        g.cosT(j, k) = std::cos(ph);
        g.sinT(j, k) = std::sin(ph);
      }
    return g;
  }
};

// Samples z(t_j) on the uniform grid t_j = j/Nt.
inline MatrixXd synthesize(const FourierLoop& z, const LoopGrid& grid) {
  if (grid.K != z.K) throw std::invalid_argument("synthesize: grid mismatch");
  const int dim = z.dim();
  MatrixXd A(dim, z.K + 1), B(dim, z.K + 1);
  A.col(0) = z.coeffs.col(z.col(0));
  B.col(0).setZero();
  for (int k = 1; k <= z.K; ++k) {
    A.col(k) = z.coeffs.col(z.col(k)) + z.coeffs.col(z.col(-k));
    B.col(k) = z.j_apply(z.coeffs.col(z.col(k)) - z.coeffs.col(z.col(-k)));
  }
  return A * grid.cosT.transpose() + B * grid.sinT.transpose();
}

// Discrete Fourier analysis back to coefficients; exact inverse of
// synthesize for band-limited input (tangential mean re-zeroed).
inline FourierLoop fit(const MatrixXd& samples, const LoopGrid& grid,
                       const VectorXd& m, int n, int l) {
  if (samples.cols() != grid.Nt)
    throw std::invalid_argument("fit: sample count does not match grid");
  FourierLoop z = FourierLoop::zero(m, grid.K, n, l);
  MatrixXd C = samples * grid.cosT / double(grid.Nt);
  MatrixXd S = samples * grid.sinT / double(grid.Nt);
  z.coeffs.col(z.col(0)) = C.col(0);
  for (int k = 1; k <= grid.K; ++k) {
    VectorXd js = z.j_apply(S.col(k));
    z.coeffs.col(z.col(k)) = C.col(k) - js;
    z.coeffs.col(z.col(-k)) = C.col(k) + js;
  }
  z.enforce_mean_zero();
  return z;
}

// Nonvanishing section of E^+ \cap E_N: t -> e^{2 pi J t} v with v the first
// normal frame vector, normalized so ||.||_{1/2}^2 = 2 pi (then the L^2
// constant c = int |e(t)|^2 dt equals 1).
inline FourierLoop e_N_plus(const VectorXd& m, int K, int n, int l) {
  FourierLoop z = FourierLoop::zero(m, K, n, l);
  z.coeffs(2 * l, z.col(1)) = 1.0;
  return z;
}

}  // namespace orbitlab
