/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_MODEL_HPP
#define MGLIFT_MODEL_HPP

#include <Eigen/Dense>
#include <vector>

#include "mglift/params.hpp"
#include "mglift/state.hpp"

namespace mglift {

// Surrogate mode applies the small-angle reduction: sin(delta) -> delta,
// cos(delta) -> 1 with second-order products dropped, omega_i -> omega_n in
// the rotation couplings of the filter/coupling/line equations, and every
// load treated as resistive. The two modes agree exactly at delta = 0, P = 0
// with resistive loads.
enum class DynamicsMode { Full, Surrogate };

// One DER's slice of the state vector.
struct DerView {
  double delta = 0, P = 0, Q = 0;
  double phi_d = 0, phi_q = 0, gam_d = 0, gam_q = 0;
  double i_ld = 0, i_lq = 0, v_od = 0, v_oq = 0, i_od = 0, i_oq = 0;

  static DerView from(const Eigen::VectorXd& x, const StateIndex& idx, int i);
};

struct PowerRates {
  double dP = 0, dQ = 0;
};

struct DroopRefs {
  double omega = 0, vod_ref = 0, voq_ref = 0;
};

struct InnerLoopRates {
  double dphi_d = 0, dphi_q = 0, dgam_d = 0, dgam_q = 0;
  double ild_ref = 0, ilq_ref = 0, vid_ref = 0, viq_ref = 0;
};

// Low-pass power filter rates (active/reactive power measurement).
PowerRates power_filter_rhs(const DerView& s, const DerParams& d);

// Droop laws: frequency from P, d-axis voltage reference from Q; the q-axis
// reference is zero. `v_set` is the live voltage-setpoint input.
DroopRefs droop(const DerView& s, const DerParams& d, double v_set);

// Cascaded voltage/current PI loops with cross-coupling and feed-forward.
InnerLoopRates inner_loops(const DerView& s, const DroopRefs& refs,
                           const DerParams& d);

// Everything needed to evaluate initial conditions from the usual published
// subset (terminal voltages/currents, initial frequency, angles, line and RL
// load currents). Missing RL currents default to zero.
struct InitialSpec {
  std::vector<double> v_od, v_oq, i_od, i_oq, i_ld, i_lq, delta;
  double omega0 = 0.0;
  std::vector<double> i_line_d, i_line_q;
  std::vector<double> i_load_d, i_load_q;
};

// Completes the remaining states (P, Q, phi, gamma) from the droop and
// inner-loop equilibrium relations at frequency omega0.
Eigen::VectorXd complete_initial_state(const MgParams& params,
                                       const InitialSpec& ic);

class Model {
 public:
  Model(MgParams params, DynamicsMode mode);

  const MgParams& params() const { return params_; }
  const StateIndex& idx() const { return idx_; }
  DynamicsMode mode() const { return mode_; }
  int n() const { return idx_.n(); }
  int m() const { return idx_.m(); }

  // dx = f(x, u); deterministic, reentrant.
  void rhs(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
           Eigen::VectorXd& dx) const;
  Eigen::VectorXd rhs(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

  // Exact directional derivative (d/ds) f(x + s vx, u + s vu) at s = 0,
  // propagated through the field with dual numbers.
  Eigen::VectorXd rhs_jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                          const Eigen::VectorXd& vx,
                          const Eigen::VectorXd& vu) const;

  // d f/d x (n x n), column by column from rhs_jvp.
  Eigen::MatrixXd rhs_jacobian(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u) const;

  // Global-frame bus voltages, one row (v_bD, v_bQ) per bus.
  Eigen::MatrixXd bus_voltages(const Eigen::VectorXd& x) const;

 private:
  MgParams params_;
  StateIndex idx_;
  DynamicsMode mode_;
};

}  // namespace mglift

#endif  // MGLIFT_MODEL_HPP
