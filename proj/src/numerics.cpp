/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/numerics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <string>

#include "mglift/errors.hpp"

namespace mglift::num {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void check_finite(const Eigen::VectorXd& x, double t) {
  if (!x.allFinite())
    throw NumericError("state diverged (non-finite) at t = " + fmt(t));
}

// Small Sylvester solve A^T X + X B = C (dims <= 2x2 each) via Kronecker.
Eigen::MatrixXd small_sylvester(const Eigen::MatrixXd& a,
                                const Eigen::MatrixXd& b,
                                const Eigen::MatrixXd& c) {
  const int na = static_cast<int>(a.rows());
  const int nb = static_cast<int>(b.rows());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(na * nb, na * nb);
  // vec(A^T X) = (I (x) A^T) vec X; vec(X B) = (B^T (x) I) vec X.
  for (int j = 0; j < nb; ++j)
    k.block(j * na, j * na, na, na) += a.transpose();
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j)
      k.block(i * na, j * na, na, na) +=
          b(j, i) * Eigen::MatrixXd::Identity(na, na);
  Eigen::VectorXd vc(na * nb);
  for (int j = 0; j < nb; ++j) vc.segment(j * na, na) = c.col(j);
  Eigen::VectorXd vx = k.fullPivLu().solve(vc);
  Eigen::MatrixXd x(na, nb);
  for (int j = 0; j < nb; ++j) x.col(j) = vx.segment(j * na, na);
  return x;
}

}  // namespace

void rk4_step(const OdeFun& f, double t, double h, Eigen::VectorXd& x) {
  const long n = x.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n);
  f(t, x, k1);
  f(t + 0.5 * h, x + 0.5 * h * k1, k2);
  f(t + 0.5 * h, x + 0.5 * h * k2, k3);
  f(t + h, x + h * k3, k4);
  x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

long integrate_rk45(
    const OdeFun& f, double t0, double t1, double rel_tol, double abs_tol,
    Eigen::VectorXd& x,
    const std::function<void(double, const Eigen::VectorXd&)>& on_step) {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
    throw ConfigError("rk45 tolerances must be positive");
  if (t1 <= t0) return 0;

  // Dormand-Prince 5(4) tableau.
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
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

  const long n = x.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), xs(n),
      err(n);
  double t = t0;
  double h = (t1 - t0) / 100.0;
  long accepted = 0;
  const long kMaxSteps = 100000000;
  for (long it = 0; t < t1; ++it) {
    if (it >= kMaxSteps)
      throw NumericError("rk45 exceeded the step budget near t = " + fmt(t));
    h = std::min(h, t1 - t);
    f(t, x, k1);
    f(t + c2 * h, x + h * (a21 * k1), k2);
    f(t + c3 * h, x + h * (a31 * k1 + a32 * k2), k3);
    f(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
    f(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
    f(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5),
      k6);
    xs = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(t + h, xs, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double norm = 0.0;
    for (long i = 0; i < n; ++i) {
      double sc = abs_tol + rel_tol * std::max(std::abs(x[i]), std::abs(xs[i]));
      double r = err[i] / sc;
      norm += r * r;
    }
    norm = std::sqrt(norm / static_cast<double>(n));
    if (!std::isfinite(norm)) norm = 2.0;  // force a rejection + shrink

    if (norm <= 1.0) {
      t += h;
      x = xs;
      check_finite(x, t);
      ++accepted;
      if (on_step) on_step(t, x);
    }
    double fac = 0.9 * std::pow(std::max(norm, 1e-10), -0.2);
    h *= std::clamp(fac, 0.2, 5.0);
    if (!(h > 0.0) || t + h == t)
      throw NumericError("rk45 step underflow at t = " + fmt(t));
  }
  return accepted;
}

Etd2Stepper::Etd2Stepper(const Eigen::MatrixXd& L, double h) : h_(h), L_(L) {
  if (L.rows() != L.cols()) throw ConfigError("ETD2 linear part not square");
  if (!(h > 0.0)) throw ConfigError("ETD2 step must be positive");
  const long n = L.rows();
  // exp of [[Lh, I, 0], [0, 0, I], [0, 0, 0]] packs exp(Lh), phi1(Lh),
  // phi2(Lh) into the top block row.
  Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  blk.topLeftCorner(n, n) = h * L;
  blk.block(0, n, n, n).setIdentity();
  blk.block(n, 2 * n, n, n).setIdentity();
  Eigen::MatrixXd e = blk.exp();
  if (!e.allFinite())
    throw NumericError("ETD2 coefficient exponential overflowed");
  E_ = e.topLeftCorner(n, n);
  P1_ = h * e.block(0, n, n, n);
  P2_ = h * e.block(0, 2 * n, n, n);
}

void Etd2Stepper::step(const OdeFun& f, double t, Eigen::VectorXd& x) const {
  Eigen::VectorXd k(x.size());
  f(t, x, k);
  Eigen::VectorXd n1 = k - L_ * x;
  Eigen::VectorXd xs = E_ * x + P1_ * n1;
  f(t + h_, xs, k);
  x = xs + P2_ * (k - L_ * xs - n1);
}

OdeSamples integrate(const OdeFun& f, const Eigen::VectorXd& x0,
                     const IntegratorSpec& spec,
                     std::vector<double> sample_times,
                     std::vector<OdeHook> hooks, const Eigen::MatrixXd* etd_l) {
  const double t0 = spec.t_span[0], t1 = spec.t_span[1];
  if (!(t1 >= t0)) throw ConfigError("integration span is reversed");
  if (spec.method != Method::RK45 && !(spec.step > 0.0))
    throw ConfigError("integrator step must be positive");
  if (spec.method == Method::ETD2 && etd_l == nullptr)
    throw ConfigError("ETD2 integration needs a linear part");

  std::sort(sample_times.begin(), sample_times.end());
  std::sort(hooks.begin(), hooks.end(),
            [](const OdeHook& a, const OdeHook& b) { return a.t < b.t; });

  std::vector<double> bounds{t1};
  for (double ts : sample_times)
    if (ts > t0 && ts < t1) bounds.push_back(ts);
  for (const OdeHook& hk : hooks)
    if (hk.t > t0 && hk.t < t1) bounds.push_back(hk.t);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  OdeSamples out;
  Eigen::VectorXd x = x0;
  auto record_if_requested = [&](double t) {
    for (double ts : sample_times)
      if (ts == t) out.t.push_back(t), out.x.push_back(x);
  };
  auto fire_hooks = [&](double t) {
    for (const OdeHook& hk : hooks)
      if (hk.t == t && hk.fn) hk.fn(t, x);
  };
  record_if_requested(t0);
  fire_hooks(t0);

  double t = t0;
  for (double tb : bounds) {
    const double span = tb - t;
    if (span > 0.0) {
      switch (spec.method) {
        case Method::RK4: {
          long nsteps = std::max<long>(1, std::lround(span / spec.step));
          double h = span / static_cast<double>(nsteps);
          for (long s = 0; s < nsteps; ++s) {
            rk4_step(f, t + s * h, h, x);
            check_finite(x, t + (s + 1) * h);
          }
          break;
        }
        case Method::RK45:
          integrate_rk45(f, t, tb, spec.rel_tol, spec.abs_tol, x);
          break;
        case Method::ETD2: {
          long nsteps = std::max<long>(1, std::lround(span / spec.step));
          double h = span / static_cast<double>(nsteps);
          Etd2Stepper stepper(*etd_l, h);
          for (long s = 0; s < nsteps; ++s) {
            stepper.step(f, t + s * h, x);
            check_finite(x, t + (s + 1) * h);
          }
          break;
        }
      }
    }
    t = tb;
    record_if_requested(t);
    fire_hooks(t);
  }
  return out;
}

Eigen::VectorXd balance(Eigen::MatrixXd& a) {
  const long n = a.rows();
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  bool converged = false;
  while (!converged) {
    converged = true;
    for (long i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (long j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      const double s = c + r;
      double f = 1.0;
      while (c < r / 2.0) {
        c *= 2.0;
        r /= 2.0;
        f *= 2.0;
      }
      while (c >= r * 2.0) {
        c /= 2.0;
        r *= 2.0;
        f /= 2.0;
      }
      if (c + r < 0.95 * s) {
        converged = false;
        d[i] *= f;
        a.col(i) *= f;
        a.row(i) /= f;
      }
    }
  }
  return d;
}

Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ConfigError("eigenvalues: matrix not square");
  if (!m.allFinite()) throw NumericError("eigenvalues: non-finite entries");
  Eigen::MatrixXd bal = m;
  balance(bal);
  Eigen::EigenSolver<Eigen::MatrixXd> es(bal, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericError("eigenvalue iteration did not converge");
  return es.eigenvalues();
}

double spectral_abscissa(const Eigen::MatrixXd& m) {
  return eigenvalues(m).real().maxCoeff();
}

namespace {

// Bartels-Stewart core: with A = U T U^T already factored, solves
// T^T Y + Y T + Qt = 0 block column by block column.
Eigen::MatrixXd lyapunov_schur(const Eigen::MatrixXd& t_mat,
                               const std::vector<int>& starts,
                               const std::vector<int>& widths,
                               const Eigen::MatrixXd& qt) {
  const long n = t_mat.rows();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, n);
  for (size_t jb = 0; jb < starts.size(); ++jb) {
    const int j0 = starts[jb], bj = widths[jb];
    Eigen::MatrixXd c = -qt.middleCols(j0, bj);
    if (j0 > 0)
      c.noalias() -= y.leftCols(j0) * t_mat.block(0, j0, j0, bj);
    // T^T Yj + Yj Tjj = C, row block by row block (top down).
    const Eigen::MatrixXd tjj = t_mat.block(j0, j0, bj, bj);
    for (size_t ib = 0; ib < starts.size(); ++ib) {
      const int i0 = starts[ib], bi = widths[ib];
      Eigen::MatrixXd rhs = c.middleRows(i0, bi);
      if (i0 > 0)
        rhs.noalias() -=
            t_mat.block(0, i0, i0, bi).transpose() * y.block(0, j0, i0, bj);
      y.block(i0, j0, bi, bj) =
          small_sylvester(t_mat.block(i0, i0, bi, bi), tjj, rhs);
    }
  }
  return y;
}

}  // namespace

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a,
                               const Eigen::MatrixXd& q_in) {
  const long n = a.rows();
  if (a.cols() != n || q_in.rows() != n || q_in.cols() != n)
    throw ConfigError("solve_lyapunov: dimension mismatch");
  const Eigen::MatrixXd q = 0.5 * (q_in + q_in.transpose());
  const double qnorm = q.norm();
  if (qnorm == 0.0) return Eigen::MatrixXd::Zero(n, n);

  const double alpha = spectral_abscissa(a);
  if (!(alpha < 0.0))
    throw NumericError("solve_lyapunov: matrix is not Hurwitz (max Re = " +
                       fmt(alpha) + ")");

  Eigen::RealSchur<Eigen::MatrixXd> schur(a);
  if (schur.info() != Eigen::Success)
    throw NumericError("solve_lyapunov: Schur iteration failed");
  const Eigen::MatrixXd& u = schur.matrixU();
  const Eigen::MatrixXd& t = schur.matrixT();

  std::vector<int> starts, widths;
  for (long j = 0; j < n;) {
    int w = (j + 1 < n && t(j + 1, j) != 0.0) ? 2 : 1;
    starts.push_back(static_cast<int>(j));
    widths.push_back(w);
    j += w;
  }

  auto solve_rhs = [&](const Eigen::MatrixXd& rhs) {
    Eigen::MatrixXd y =
        lyapunov_schur(t, starts, widths, u.transpose() * rhs * u);
    Eigen::MatrixXd p = u * y * u.transpose();
    return Eigen::MatrixXd(0.5 * (p + p.transpose()));
  };

  Eigen::MatrixXd p = solve_rhs(q);
  // One refinement pass, reusing the Schur factorization.
  Eigen::MatrixXd resid = a.transpose() * p + p * a + q;
  p += solve_rhs(resid);
  resid = a.transpose() * p + p * a + q;

  if (resid.norm() > 1e-10 * qnorm)
    throw NumericError("solve_lyapunov: ill-conditioned (residual " +
                       fmt(resid.norm() / qnorm) + " of ||Q||)");
  return p;
}

namespace {

double care_residual_norm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g,
                          const Eigen::MatrixXd& q, const Eigen::MatrixXd& p) {
  return (a.transpose() * p + p * a - p * g * p + q).norm();
}

}  // namespace

CareResult solve_care(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      const Eigen::MatrixXd& q_in, const Eigen::MatrixXd& r_in) {
  const long n = a.rows();
  if (a.cols() != n || b.rows() != n || q_in.rows() != n || q_in.cols() != n ||
      r_in.rows() != b.cols() || r_in.cols() != b.cols())
    throw ConfigError("solve_care: dimension mismatch");
  const Eigen::MatrixXd q = 0.5 * (q_in + q_in.transpose());
  const Eigen::MatrixXd r = 0.5 * (r_in + r_in.transpose());

  Eigen::LLT<Eigen::MatrixXd> r_llt(r);
  if (r_llt.info() != Eigen::Success)
    throw ConfigError("solve_care: control weight R is not positive definite");
  const Eigen::MatrixXd g = b * r_llt.solve(b.transpose());

  // Symplectic radix-2 balancing diag(s, 1/s) of the Hamiltonian.
  Eigen::MatrixXd ham(2 * n, 2 * n);
  ham << a, -g, -q, -a.transpose();
  Eigen::MatrixXd habs = ham.cwiseAbs();
  Eigen::VectorXd d = balance(habs);
  Eigen::VectorXd s(n), sinv(n);
  for (long i = 0; i < n; ++i) {
    double e = std::round(0.5 * (std::log2(d[i]) - std::log2(d[n + i])));
    s[i] = std::exp2(e);
    sinv[i] = std::exp2(-e);
  }
  const Eigen::MatrixXd ab = sinv.asDiagonal() * a * s.asDiagonal();
  const Eigen::MatrixXd gb = sinv.asDiagonal() * g * sinv.asDiagonal();
  const Eigen::MatrixXd qb = s.asDiagonal() * q * s.asDiagonal();
  Eigen::MatrixXd z(2 * n, 2 * n);
  z << ab, -gb, -qb, -ab.transpose();

  CareResult out;

  // Determinant-scaled matrix sign iteration.
  const double zscale = std::max(z.norm(), 1.0);
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(z);
    double logdet = 0.0;
    for (long i = 0; i < 2 * n; ++i) {
      const double piv = std::abs(lu.matrixLU()(i, i));
      if (piv < 1e-300)
        throw NumericError(
            "solve_care: Hamiltonian is singular (imaginary-axis mode)");
      logdet += std::log(piv);
    }
    const double c = std::exp(logdet / static_cast<double>(2 * n));
    Eigen::MatrixXd zn =
        0.5 * (z / c + c * lu.inverse());
    if (!zn.allFinite())
      throw NumericError("solve_care: sign iteration overflowed");
    const double diff = (zn - z).norm();
    z = zn;
    ++out.sign_iterations;
    if (diff <= 1e-13 * zscale && it >= 2) break;
  }
  // Two unscaled cleanup sweeps.
  for (int it = 0; it < 2; ++it) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(z);
    z = 0.5 * (z + lu.inverse());
  }

  // Stable subspace: (sign + I) [I; P'] = 0, solved in least squares.
  Eigen::MatrixXd lhs(2 * n, n), rhs(2 * n, n);
  lhs.topRows(n) = z.topRightCorner(n, n);
  lhs.bottomRows(n) =
      z.bottomRightCorner(n, n) + Eigen::MatrixXd::Identity(n, n);
  rhs.topRows(n) = -(z.topLeftCorner(n, n) + Eigen::MatrixXd::Identity(n, n));
  rhs.bottomRows(n) = -z.bottomLeftCorner(n, n);
  Eigen::MatrixXd pb =
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(lhs).solve(rhs);
  Eigen::MatrixXd p = s.asDiagonal().inverse() * pb * s.asDiagonal().inverse();
  p = 0.5 * (p + p.transpose());

  const double qnorm = std::max(q.norm(), 1.0);
  double best = care_residual_norm(a, g, q, p);
  Eigen::MatrixXd best_p = p;

  // Newton-Kleinman polish in the original coordinates.
  for (int it = 0; it < 12; ++it) {
    const Eigen::MatrixXd k = r_llt.solve(b.transpose() * p);
    const Eigen::MatrixXd acl = a - b * k;
    Eigen::MatrixXd qn = q + k.transpose() * r * k;
    try {
      p = solve_lyapunov(acl, qn);
    } catch (const NumericError&) {
      break;  // lost stabilizing iterate; keep the best seen
    }
    ++out.newton_iterations;
    const double res = care_residual_norm(a, g, q, p);
    const bool improved = res < 0.9 * best;
    if (res < best) {
      best = res;
      best_p = p;
    }
    if (res <= 1e-11 * qnorm || !improved) break;
  }

  out.P = best_p;
  out.residual = best;
  if (!(best <= 1e-6 * qnorm)) {
    const Eigen::MatrixXd acl =
        a - g * best_p;  // G P = B R^-1 B^T P = B K
    throw NumericError(
        "solve_care: no stabilizing solution found (residual " +
        fmt(best / qnorm) + " of ||Q||, closed-loop abscissa " +
        fmt(spectral_abscissa(acl)) + ")");
  }
  return out;
}

LsqResult least_squares_info(const Eigen::MatrixXd& m, const Eigen::VectorXd& b,
                             double ridge) {
  if (m.rows() != b.size())
    throw ConfigError("least_squares: row count mismatch");
  if (ridge < 0.0) throw ConfigError("least_squares: negative ridge");
  LsqResult out;
  if (ridge > 0.0) {
    const long rows = m.rows(), cols = m.cols();
    Eigen::MatrixXd stacked(rows + cols, cols);
    stacked.topRows(rows) = m;
    stacked.bottomRows(cols) =
        std::sqrt(ridge) * Eigen::MatrixXd::Identity(cols, cols);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows + cols);
    rhs.head(rows) = b;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(stacked);
    out.x = cod.solve(rhs);
    out.rank = static_cast<int>(cols);
    out.rank_deficient = false;
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
  out.x = cod.solve(b);
  out.rank = static_cast<int>(cod.rank());
  out.rank_deficient = out.rank < std::min(m.rows(), m.cols());
  return out;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& m,
                              const Eigen::VectorXd& b, double ridge) {
  return least_squares_info(m, b, ridge).x;
}

}  // namespace mglift::num
