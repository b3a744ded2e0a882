/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_NUMERICS_HPP
#define MGLIFT_NUMERICS_HPP

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <vector>

namespace mglift::num {

// Right-hand side callback: f(t, x, dx) writes dx = f(t, x).
using OdeFun =
    std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>;

enum class Method { RK4, RK45, ETD2 };

struct IntegratorSpec {
  Method method = Method::ETD2;
  double step = 2e-5;     // RK4 / ETD2 step (s)
  double rel_tol = 1e-8;  // RK45 controller tolerances
  double abs_tol = 1e-8;
  std::array<double, 2> t_span{0.0, 0.0};
  // ETD2 run control (consumed by the scenario driver):
  double l_refresh = 0.25;    // s between linearization refreshes (full model)
  double warmup_time = 1e-4;  // leading explicit segment for algebraic-init
                              // transients
  double warmup_step = 0.0;   // 0 -> derived from the network damping rates
};

// One classical Runge-Kutta step of size h, in place.
void rk4_step(const OdeFun& f, double t, double h, Eigen::VectorXd& x);

// Adaptive Dormand-Prince 5(4) from t0 to t1, in place. `on_step` (optional)
// observes each accepted step. Returns the number of accepted steps.
long integrate_rk45(
    const OdeFun& f, double t0, double t1, double rel_tol, double abs_tol,
    Eigen::VectorXd& x,
    const std::function<void(double, const Eigen::VectorXd&)>& on_step = {});

// Second-order exponential time differencing (ETD2RK) with a frozen linear
// part L and fixed step h:
//   x* = E x + hphi1 (f(x) - L x),   E = exp(Lh)
//   x+ = x* + hphi2 ((f(x*) - L x*) - (f(x) - L x))
// Exact for f(x) = L x; the phi weights are read off a block-matrix
// exponential so no series truncation enters beyond exp() itself.
class Etd2Stepper {
 public:
  Etd2Stepper(const Eigen::MatrixXd& L, double h);

  void step(const OdeFun& f, double t, Eigen::VectorXd& x) const;

  double h() const { return h_; }
  const Eigen::MatrixXd& exp_lh() const { return E_; }
  const Eigen::MatrixXd& h_phi1() const { return P1_; }
  const Eigen::MatrixXd& h_phi2() const { return P2_; }

 private:
  double h_ = 0.0;
  Eigen::MatrixXd L_, E_, P1_, P2_;
};

// A state mutation scheduled at an exact time (integration steps split there).
struct OdeHook {
  double t = 0.0;
  std::function<void(double, Eigen::VectorXd&)> fn;
};

struct OdeSamples {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
};

// Drives x0 across spec.t_span, sampling the state at the requested times
// (exactly; steps are split at sample and hook boundaries). Samples record
// the pre-hook state. RK4 segments use a uniform effective step no larger
// than spec.step; ETD2 requires `etd_l`. Throws NumericError when the state
// leaves the finite range.
OdeSamples integrate(const OdeFun& f, const Eigen::VectorXd& x0,
                     const IntegratorSpec& spec,
                     std::vector<double> sample_times,
                     std::vector<OdeHook> hooks = {},
                     const Eigen::MatrixXd* etd_l = nullptr);

// Parlett-Reinsch radix-2 balancing, in place; returns the diagonal scaling d
// with  A_balanced = D^-1 A D,  D = diag(d).
Eigen::VectorXd balance(Eigen::MatrixXd& a);

// Full dense spectrum (balanced QR iteration).
Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& m);

// max Re lambda(M).
double spectral_abscissa(const Eigen::MatrixXd& m);

// Solves A^T P + P A + Q = 0 for symmetric P (A Hurwitz, Q symmetrized).
// Residual is driven below 1e-10 * ||Q||_F or NumericError is thrown.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a,
                               const Eigen::MatrixXd& q);

struct CareResult {
  Eigen::MatrixXd P;
  double residual = 0.0;  // ||A'P+PA-PGP+Q||_F
  int sign_iterations = 0;
  int newton_iterations = 0;
};

// Solves A^T P + P A - P B R^-1 B^T P + Q = 0 for the stabilizing P >= 0.
// Matrix sign iteration (determinant-scaled, symplectically balanced) seeds a
// Newton-Kleinman polish with Lyapunov inner solves. Throws ConfigError when
// R is not positive definite and NumericError on stabilizability failure.
CareResult solve_care(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      const Eigen::MatrixXd& q, const Eigen::MatrixXd& r);

struct LsqResult {
  Eigen::VectorXd x;
  int rank = 0;
  bool rank_deficient = false;  // rank < min(rows, cols) at ridge = 0
};

// argmin ||Mx - b||^2 + ridge ||x||^2 via complete orthogonal decomposition;
// the ridge-free solution is the minimum-norm least-squares solution.
LsqResult least_squares_info(const Eigen::MatrixXd& m, const Eigen::VectorXd& b,
                             double ridge = 0.0);
Eigen::VectorXd least_squares(const Eigen::MatrixXd& m,
                              const Eigen::VectorXd& b, double ridge = 0.0);

}  // namespace mglift::num

#endif  // MGLIFT_NUMERICS_HPP
