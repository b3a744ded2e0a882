/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_CONTROL_HPP
#define MGLIFT_CONTROL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "mglift/lift.hpp"

namespace mglift {

// Output-error integrators appended to the lifted plant:
//   d/dt [z; z_I] = [[A, 0], [-C, 0]] [z; z_I] + [[B]; [0]] U,
//   y = C z.
struct AugmentedSystem {
  Eigen::MatrixXd a_tilde;  // (N + m) x (N + m)
  Eigen::MatrixXd b_tilde;  // (N + m) x M
  Eigen::MatrixXd c_tilde;  // m x (N + m)
  int n_lift = 0;           // N
  int n_in = 0;             // M
  int m = 0;                // outputs / physical inputs
};

AugmentedSystem augment(const LiftedModel& model);

// Scalar class weights expanded into diagonal Q (state + up-weighted
// integrators) and R (control effort) for the augmented plant.
struct LqiWeights {
  double state = 1.0;
  double integrator = 1e3;
  double control = 1.0;
};

void make_weight_matrices(const AugmentedSystem& aug, const LqiWeights& w,
                          Eigen::MatrixXd& q, Eigen::MatrixXd& r);

// Minimum-norm (z_inf, U_inf) with  A z_inf + B U_inf = 0,  C z_inf = y_ref.
struct SteadyState {
  Eigen::VectorXd z_inf;  // N
  Eigen::VectorXd u_inf;  // M
  double residual = 0.0;  // inf-norm of the stacked defect after refinement
};

SteadyState steady_state(const LiftedModel& model,
                         const Eigen::VectorXd& y_ref);

// Newton solve for a nonlinear plant equilibrium holding v_od = y_ref, with
// the reference DER angle pinned to zero (the center-of-mass frame leaves it
// indeterminate, so its row of the Jacobian is identically zero).  Also
// returns the plant dc gain u -> v_od at the solution.
struct PlantEquilibrium {
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  Eigen::MatrixXd dc_gain;  // m x m
  double residual = 0.0;    // inf-norm of the stacked defect at the solution
};

PlantEquilibrium plant_equilibrium(const Model& model,
                                   const Eigen::VectorXd& x_seed,
                                   const Eigen::VectorXd& u_seed,
                                   const Eigen::VectorXd& y_ref);

struct LqiController {
  Eigen::MatrixXd k;  // M x (N + m) state-feedback gain  R^-1 B~' P
  Eigen::MatrixXd p;  // Riccati solution
  Eigen::VectorXd z_inf;
  Eigen::VectorXd u_inf;
  Eigen::VectorXd y_ref;
  LqiWeights weights;
  double care_residual = 0.0;
  double closed_loop_abscissa = 0.0;  // max Re eig(A~ - B~ K)
  std::uint64_t model_fingerprint = 0;
  int n_lift = 0, n_in = 0, m = 0;

  // Physical recovery data (filled by the model-level synthesis): the
  // nonlinear plant equilibrium that holds y = y_ref, its input, the
  // plant dc gain u -> y there, and the integral recovery gain
  // K_I = recovery_gain * dc_gain^-1.
  Eigen::VectorXd x_eq;
  Eigen::VectorXd u_eq;
  Eigen::MatrixXd dc_gain;   // m x m
  Eigen::MatrixXd k_i_phys;  // m x m
  double recovery_gain = 0.0;
  double equilibrium_residual = 0.0;  // inf-norm of rhs at (x_eq, u_eq)

  bool has_recovery() const { return k_i_phys.size() > 0; }
};

// Core synthesis on an already-augmented plant with explicit weight matrices:
// CARE, gain, stability certificate; the steady-state pair and reference are
// attached to the returned controller. Throws NumericError when the closed
// loop is not certified stable.
LqiController synthesize(const AugmentedSystem& aug, const Eigen::MatrixXd& q_w,
                         const Eigen::MatrixXd& r_w, const SteadyState& target,
                         const Eigen::VectorXd& y_ref);

// Full pipeline: augment, steady state, weight expansion, core synthesis,
// model fingerprint, and the physical recovery data (nonlinear equilibrium
// seeded from the mirror of z_inf, dc gain, integral gain).
LqiController synthesize(const LiftedModel& model, const Eigen::VectorXd& y_ref,
                         const LqiWeights& weights = {});

// One evaluation of the control law at state x with integrator state z_i.
// The commanded lifted input is U = U_inf - K [z - z_inf; z_I]; the physical
// setpoints are recovered by decoupled integral action on the tracking
// integrators, u = u_eq + K_I z_I.  Projecting the commanded U onto the
// physical input columns instead (least squares against script_b) feeds the
// derivative-chain rows of the command back into the plant; their state
// sensitivities are orders of magnitude above the physical rows, and every
// such projection tested destabilizes the closed loop.  The integral
// recovery keeps the lifted command as the analysis/export signal and drives
// the plant with the offset-free part, which is what restores the voltages.
struct ControlStep {
  Eigen::VectorXd u;         // m, recovered physical setpoints
  Eigen::VectorXd u_lifted;  // M, the commanded lifted input
};

ControlStep control_step(const LqiController& ctrl, const LiftedModel& model,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& z_i,
                         const Eigen::VectorXd& u_prev);

// FNV-1a over the dimensions and raw matrix bytes of (A, B, C); identifies
// the generating lifted model in serialized controllers.
std::uint64_t model_fingerprint(const LiftedModel& model);

void save_controller(const LqiController& ctrl, const std::string& path);
LqiController load_controller(const std::string& path);

}  // namespace mglift

#endif  // MGLIFT_CONTROL_HPP
