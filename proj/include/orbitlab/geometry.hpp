#pragma once

// Symplectic model near the extremal submanifold M: frames adapted to the
// splitting T_mW = T_mM (+) (T_mM)^Omega, compatible almost complex
// structures, Darboux-family charts, and normal Hessians.
//
// Conventions (fixed here, inherited by every other module):
//   * Omega(X_H, .) = dH, i.e. X_H = -Omega^{-1} grad H in coordinates.
//   * g_J(u,v) = Omega(u, J v), required symmetric positive definite;
//     for Omega = [[0,1],[-1,0]] this gives J = [[0,-1],[1,0]].
//   * Frames are unitary: in the combined basis [tangent | normal] the
//     matrices of Omega, J, g_J are block-standard:
//       Omega~ = [[0,I],[-I,0]],  J~ = [[0,-I],[I,0]],  g~ = I
//     per block, so chart coordinates carry the Euclidean inner product.

#include <functional>
#include <string>

#include "orbitlab/core.hpp"

namespace orbitlab {

// Truncated Fourier series of a scalar field on the flat torus R^2/(2 pi Z)^2.
struct Fourier2 {
  struct Term {
    int k1 = 0, k2 = 0;
    double c = 0.0;  // cos coefficient
    double s = 0.0;  // sin coefficient
  };
  double c0 = 0.0;
  std::vector<Term> terms;

  static Fourier2 constant(double v) {
    Fourier2 f;
    f.c0 = v;
    return f;
  }

  bool is_constant() const { return terms.empty(); }

  double value(const Vector2d& x) const {
    double v = c0;
    for (const auto& t : terms) {
      double ph = t.k1 * x[0] + t.k2 * x[1];
      v += t.c * std::cos(ph) + t.s * std::sin(ph);
    }
    return v;
  }

  Vector2d grad(const Vector2d& x) const {
    Vector2d g = Vector2d::Zero();
    for (const auto& t : terms) {
      double ph = t.k1 * x[0] + t.k2 * x[1];
      double d = -t.c * std::sin(ph) + t.s * std::cos(ph);
      g[0] += t.k1 * d;
      g[1] += t.k2 * d;
    }
    return g;
  }
};

// Metric on the torus base as Fourier data; identity by default.
struct TorusMetric {
  Fourier2 g11 = Fourier2::constant(1.0);
  Fourier2 g12 = Fourier2::constant(0.0);
  Fourier2 g22 = Fourier2::constant(1.0);

  bool is_identity() const {
    return g11.is_constant() && g12.is_constant() && g22.is_constant() &&
           g11.c0 == 1.0 && g12.c0 == 0.0 && g22.c0 == 1.0;
  }

  Matrix2d value(const Vector2d& x) const {
    Matrix2d g;
    g(0, 0) = g11.value(x);
    g(0, 1) = g(1, 0) = g12.value(x);
    g(1, 1) = g22.value(x);
    return g;
  }

  Matrix2d dvalue(const Vector2d& x, int k) const {
    Matrix2d d;
    d(0, 0) = g11.grad(x)[k];
    d(0, 1) = d(1, 0) = g12.grad(x)[k];
    d(1, 1) = g22.grad(x)[k];
    return d;
  }

  Matrix2d inverse(const Vector2d& x) const { return value(x).inverse(); }
};

struct ModelSystem {
  enum class BaseKind { Point, FlatTorus };

  int n = 1;  // half-dimension of W
  int l = 0;  // half-dimension of M
  BaseKind base_kind = BaseKind::Point;
  std::string name = "system";

  std::function<double(const VectorXd&)> hamiltonian;
  std::function<VectorXd(const VectorXd&)> grad_hamiltonian;  // may be empty
  std::function<MatrixXd(const VectorXd&)> symplectic_form;

  // Flat-torus data (unused for point bases).
  Fourier2 magnetic = Fourier2::constant(1.0);
  TorusMetric metric;

  VectorXd point_base;  // embedded base point for l = 0 (defaults to origin)

  double chart_radius = 4.0;
  int chart_quad_order = 12;

  int dim() const { return 2 * n; }
  int base_dim() const { return 2 * l; }
  int normal_dim() const { return 2 * (n - l); }

  // Phase-space coordinates of the base point m (2l base coords).
  VectorXd embed(const VectorXd& m) const {
    if (base_kind == BaseKind::Point) {
      if (point_base.size() == dim()) return point_base;
      return VectorXd::Zero(dim());
    }
    VectorXd z = VectorXd::Zero(dim());
    z.head(base_dim()) = m;
    return z;
  }

  VectorXd grad_h(const VectorXd& z) const {
    if (grad_hamiltonian) return grad_hamiltonian(z);
    // central differences, step eps^{1/3} * scale
    const double h = std::cbrt(std::numeric_limits<double>::epsilon()) *
                     std::max(1.0, z.norm());
    VectorXd g(z.size());
    VectorXd zp = z, zm = z;
    for (int i = 0; i < z.size(); ++i) {
      zp[i] += h;
      zm[i] -= h;
      g[i] = (hamiltonian(zp) - hamiltonian(zm)) / (2.0 * h);
      zp[i] = z[i];
      zm[i] = z[i];
    }
    return g;
  }
};

// J = A (A^T A)^{-1/2} for the map A with seed(A u, v) = Omega(u, v),
// computed through the Cholesky factor of the seed metric. The result
// satisfies J^2 = -I and Omega(., J.) symmetric positive definite.
inline MatrixXd compatible_structure(const MatrixXd& omega,
                                     const MatrixXd& metric_seed) {
  const auto dim = omega.rows();
  if ((omega + omega.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + omega.cwiseAbs().maxCoeff()))
    throw GeometryError("compatible_structure: omega not antisymmetric");
  Eigen::LLT<MatrixXd> llt(metric_seed);
  if (llt.info() != Eigen::Success)
    throw GeometryError("compatible_structure: seed metric not positive definite");
  MatrixXd L = llt.matrixL();
  MatrixXd Om = L.triangularView<Eigen::Lower>().solve(omega);
  Om = L.triangularView<Eigen::Lower>().solve(Om.transpose()).transpose();
  // A~ = -Om in the orthonormalized coordinates; M = (A~^T A~)^{1/2}.
  MatrixXd P = Om.transpose() * Om;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(P);
  if (es.eigenvalues().minCoeff() <= 1e-14 * es.eigenvalues().maxCoeff())
    throw GeometryError("compatible_structure: omega not invertible");
  MatrixXd Minv = es.eigenvectors() *
                  es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                  es.eigenvectors().transpose();
  MatrixXd Jtil = -Om * Minv;
  // back to the original coordinates: J = L^{-T} J~ L^T
  MatrixXd J = L.transpose().triangularView<Eigen::Upper>().solve(
      (Jtil * L.transpose()));
  (void)dim;
  return J;
}

struct TangentFrame {
  VectorXd m;        // base coordinates (2l)
  VectorXd m_phase;  // embedded point (2n)
  int n = 1, l = 0;

  MatrixXd tangent_basis;  // 2n x 2l, ambient columns
  MatrixXd normal_basis;   // 2n x 2(n-l)
  MatrixXd combined;       // C = [tangent | normal]
  MatrixXd combined_inv;

  MatrixXd omega_m;  // ambient Omega(m)
  MatrixXd j_m;      // ambient J(m)
  MatrixXd g_m;      // ambient g_J(m)
  MatrixXd omega_N;  // standard block by construction

  int dim() const { return 2 * n; }
  int base_dim() const { return 2 * l; }
  int normal_dim() const { return 2 * (n - l); }

  // J~ applied to combined coordinates (blockwise [[0,-I],[I,0]]).
  VectorXd j_combined(const VectorXd& z) const {
    VectorXd r(z.size());
    apply_block(z, r, 0, l);
    apply_block(z, r, 2 * l, n - l);
    return r;
  }

  // cos(theta) z + sin(theta) J~ z, the frame rotation e^{theta J~}.
  VectorXd rotate(const VectorXd& z, double c, double s) const {
    VectorXd r = c * z;
    VectorXd jz = j_combined(z);
    r += s * jz;
    return r;
  }

 private:
  static void apply_block(const VectorXd& z, VectorXd& r, int off, int half) {
    for (int i = 0; i < half; ++i) {
      r[off + i] = -z[off + half + i];
      r[off + half + i] = z[off + i];
    }
  }
};

namespace detail {

// Orthonormal J-adapted basis of a symplectic subspace: columns
// {u_1..u_d, J u_1..J u_d} with g~ = I, J~ = [[0,-I],[I,0]],
// Omega~ = [[0,I],[-I,0]].
inline MatrixXd unitary_block(const MatrixXd& raw_cols, const MatrixXd& omega) {
  const int d = int(raw_cols.cols());
  if (d == 0) return raw_cols;
  MatrixXd om_blk = raw_cols.transpose() * omega * raw_cols;
  MatrixXd J_blk = compatible_structure(om_blk, MatrixXd::Identity(d, d));
  MatrixXd g_blk = om_blk * J_blk;
  g_blk = 0.5 * (g_blk + g_blk.transpose());

  std::vector<VectorXd> us, ws;
  for (int seed = 0; seed < d && int(us.size()) < d / 2; ++seed) {
    VectorXd v = VectorXd::Zero(d);
    v[seed] = 1.0;
    for (std::size_t j = 0; j < us.size(); ++j) {
      v -= us[j] * (us[j].dot(g_blk * v));
      v -= ws[j] * (ws[j].dot(g_blk * v));
    }
    double nrm2 = v.dot(g_blk * v);
    if (nrm2 < 1e-12) continue;
    v /= std::sqrt(nrm2);
    us.push_back(v);
    ws.push_back(J_blk * v);
  }
  if (int(us.size()) != d / 2)
    throw GeometryError("unitary_block: failed to complete J-adapted basis");
  MatrixXd U(d, d);
  for (int j = 0; j < d / 2; ++j) {
    U.col(j) = us[std::size_t(j)];
    U.col(d / 2 + j) = ws[std::size_t(j)];
  }
  return raw_cols * U;
}

}  // namespace detail

inline TangentFrame build_frame(const ModelSystem& sys, const VectorXd& m) {
  TangentFrame fr;
  fr.m = m;
  fr.n = sys.n;
  fr.l = sys.l;
  fr.m_phase = sys.embed(m);
  fr.omega_m = sys.symplectic_form(fr.m_phase);

  const int dim = sys.dim();
  const int tdim = sys.base_dim();
  const int ndim_expected = sys.normal_dim();

  MatrixXd t_raw(dim, tdim);
  for (int i = 0; i < tdim; ++i) t_raw.col(i) = VectorXd::Unit(dim, i);

  MatrixXd n_raw(dim, ndim_expected);
  if (tdim > 0) {
    MatrixXd om_T = t_raw.transpose() * fr.omega_m * t_raw;
    Eigen::FullPivLU<MatrixXd> lu(om_T);
    if (!lu.isInvertible())
      throw GeometryError(
          "build_frame: Omega degenerate on T_mM (M not symplectic at m)");
    // Omega-orthogonal projection of the standard basis onto (T_mM)^Omega,
    // greedy pick of the largest projections in deterministic order.
    int got = 0;
    std::vector<VectorXd> picked;
    for (int j = 0; j < dim && got < ndim_expected; ++j) {
      VectorXd v = VectorXd::Unit(dim, j);
      VectorXd rhs = t_raw.transpose() * (fr.omega_m * v);
      VectorXd c = lu.solve(rhs);
      VectorXd w = v - t_raw * c;
      for (const auto& p : picked) w -= p * (p.dot(w) / p.squaredNorm());
      if (w.norm() < 1e-8) continue;
      picked.push_back(w);
      n_raw.col(got++) = w;
    }
    if (got != ndim_expected)
      throw GeometryError("build_frame: normal space has wrong dimension");
  } else {
    for (int i = 0; i < ndim_expected; ++i)
      n_raw.col(i) = VectorXd::Unit(dim, i);
  }

  fr.tangent_basis = detail::unitary_block(t_raw, fr.omega_m);
  fr.normal_basis = detail::unitary_block(n_raw, fr.omega_m);

  fr.combined.resize(dim, dim);
  if (tdim > 0) fr.combined.leftCols(tdim) = fr.tangent_basis;
  fr.combined.rightCols(ndim_expected) = fr.normal_basis;
  fr.combined_inv = fr.combined.inverse();

  // Standard blocks assembled back to ambient coordinates.
  MatrixXd Jt = MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) Jt.col(i) = fr.j_combined(VectorXd::Unit(dim, i));
  fr.j_m = fr.combined * Jt * fr.combined_inv;
  fr.g_m = fr.combined_inv.transpose() * fr.combined_inv;

  const int nd = ndim_expected;
  fr.omega_N = MatrixXd::Zero(nd, nd);
  for (int i = 0; i < nd / 2; ++i) {
    fr.omega_N(i, nd / 2 + i) = 1.0;
    fr.omega_N(nd / 2 + i, i) = -1.0;
  }

  // The combined basis must reduce Omega(m) to the standard block form.
  MatrixXd om_c = fr.combined.transpose() * fr.omega_m * fr.combined;
  MatrixXd om_std = MatrixXd::Zero(dim, dim);
  if (tdim > 0) om_std.topLeftCorner(tdim, tdim) = [&] {
    MatrixXd o = MatrixXd::Zero(tdim, tdim);
    for (int i = 0; i < tdim / 2; ++i) {
      o(i, tdim / 2 + i) = 1.0;
      o(tdim / 2 + i, i) = -1.0;
    }
    return o;
  }();
  om_std.bottomRightCorner(nd, nd) = fr.omega_N;
  if ((om_c - om_std).cwiseAbs().maxCoeff() > 1e-9)
    throw GeometryError("build_frame: combined basis failed to normalize Omega");

  return fr;
}

// Darboux-family chart at m. For the flat torus it composes the fibrewise
// translation by the radial-gauge potential A (Poincare homotopy primitive,
// A(x0) = 0) with the constant shear that makes D_0 Phi_m the identity; the
// pullback of the twisted form then equals Omega(m) up to the quadrature
// error of the homotopy integral. For a point base the chart is the identity
// translation.
struct DarbouxChart {
  const ModelSystem* sys = nullptr;
  ModelSystem::BaseKind kind = ModelSystem::BaseKind::Point;
  VectorXd center_base;   // (2l)
  VectorXd center_phase;  // (2n)
  Matrix2d half_omega0 = Matrix2d::Zero();
  double chart_radius = 0.0;
  int quad_order = 12;

  // Radial-gauge potential at x = x0 + delta and its Jacobian.
  Vector2d potential(const Vector2d& delta) const {
    const auto& rule = gauss01_weight_s(quad_order);
    double ib = 0.0;
    Vector2d x0(center_base[0], center_base[1]);
    for (std::size_t a = 0; a < rule.nodes.size(); ++a)
      ib += rule.weights[a] * sys->magnetic.value(x0 + rule.nodes[a] * delta);
    return Vector2d(-delta[1] * ib, delta[0] * ib);
  }

  Matrix2d potential_jacobian(const Vector2d& delta) const {
    const auto& rule = gauss01_weight_s(quad_order);
    double ib = 0.0;
    Vector2d dib = Vector2d::Zero();
    Vector2d x0(center_base[0], center_base[1]);
    for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
      double s = rule.nodes[a], w = rule.weights[a];
      Vector2d xs = x0 + s * delta;
      ib += w * sys->magnetic.value(xs);
      dib += w * s * sys->magnetic.grad(xs);
    }
    Matrix2d d;  // d(j,k) = dA_j/dx_k
    d(0, 0) = -delta[1] * dib[0];
    d(0, 1) = -delta[1] * dib[1] - ib;
    d(1, 0) = delta[0] * dib[0] + ib;
    d(1, 1) = delta[0] * dib[1];
    return d;
  }

  // w: ambient tangent coordinates in T_mW.
  VectorXd map(const VectorXd& w) const {
    if (kind == ModelSystem::BaseKind::Point) return center_phase + w;
    VectorXd z(4);
    Vector2d wx(w[0], w[1]), wp(w[2], w[3]);
    Vector2d x = Vector2d(center_base[0], center_base[1]) + wx;
    Vector2d p = wp - half_omega0 * wx - potential(wx);
    z << x[0], x[1], p[0], p[1];
    return z;
  }

  MatrixXd differential(const VectorXd& w) const {
    const int d = int(w.size());
    MatrixXd D = MatrixXd::Identity(d, d);
    if (kind == ModelSystem::BaseKind::Point) return D;
    Vector2d wx(w[0], w[1]);
    D.block<2, 2>(2, 0) = -half_omega0 - potential_jacobian(wx);
    return D;
  }

  // max |(D Phi)^T Omega(Phi(w)) (D Phi) - Omega(m)| entry at w.
  double pullback_residual(const VectorXd& w) const {
    MatrixXd D = differential(w);
    MatrixXd om = sys->symplectic_form(map(w));
    MatrixXd om0 = sys->symplectic_form(center_phase);
    return (D.transpose() * om * D - om0).cwiseAbs().maxCoeff();
  }
};

inline DarbouxChart darboux_chart(const ModelSystem& sys, const VectorXd& m,
                                  double symplecticity_tol = 1e-8) {
  DarbouxChart ch;
  ch.sys = &sys;
  ch.kind = sys.base_kind;
  ch.center_base = m;
  ch.center_phase = sys.embed(m);
  ch.chart_radius = sys.chart_radius;
  ch.quad_order = sys.chart_quad_order;
  if (sys.base_kind == ModelSystem::BaseKind::FlatTorus) {
    double b0 = sys.magnetic.value(Vector2d(m[0], m[1]));
    ch.half_omega0 << 0.0, 0.5 * b0, -0.5 * b0, 0.0;
    // Spot-check symplecticity at the requested radius.
    SplitMix64 rng(0x5eedULL);
    double worst = 0.0;
    for (int i = 0; i < 16; ++i) {
      VectorXd w = rng.normal_vector(4);
      w *= sys.chart_radius / w.norm();
      worst = std::max(worst, ch.pullback_residual(w));
    }
    if (worst > symplecticity_tol)
      throw GeometryError(
          "darboux_chart: symplecticity residual " + std::to_string(worst) +
          " exceeds tolerance at radius " + std::to_string(sys.chart_radius) +
          " (chart_radius too large for the field variation)");
  }
  return ch;
}

// Matrix S of the limiting fibre Hamiltonian: Q(y) = y^T S y equals the
// quadratic part of H o Phi_m in the unitary normal coordinates (half the
// second-derivative matrix). Central second differences; exact up to
// roundoff for quadratic Hamiltonians since H vanishes on M.
inline MatrixXd normal_hessian(const ModelSystem& sys, const DarbouxChart& chart,
                               const TangentFrame& frame) {
  const int nd = frame.normal_dim();
  const double h = std::cbrt(std::numeric_limits<double>::epsilon());
  auto Hc = [&](const VectorXd& y) {
    return sys.hamiltonian(chart.map(frame.normal_basis * y));
  };
  const double h0 = Hc(VectorXd::Zero(nd));
  MatrixXd hess(nd, nd);
  for (int i = 0; i < nd; ++i) {
    VectorXd e = VectorXd::Zero(nd);
    e[i] = h;
    hess(i, i) = (Hc(e) - 2.0 * h0 + Hc(-e)) / (h * h);
  }
  for (int i = 0; i < nd; ++i)
    for (int j = i + 1; j < nd; ++j) {
      VectorXd epp = VectorXd::Zero(nd), epm = VectorXd::Zero(nd);
      epp[i] = h;
      epp[j] = h;
      epm[i] = h;
      epm[j] = -h;
      double v = (Hc(epp) - Hc(epm) - Hc(-epm) + Hc(-epp)) / (4.0 * h * h);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  MatrixXd S = 0.5 * hess;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    std::string at = "(";
    for (int i = 0; i < frame.m.size(); ++i)
      at += (i ? "," : "") + std::to_string(frame.m[i]);
    at += ")";
    throw GeometryError(
        "normal_hessian: not positive definite at base point " + at +
        " (Bott nondegeneracy violated)");
  }
  return S;
}

}  // namespace orbitlab
