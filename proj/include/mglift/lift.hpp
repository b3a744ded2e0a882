/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_LIFT_HPP
#define MGLIFT_LIFT_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mglift/model.hpp"
#include "mglift/params.hpp"
#include "mglift/state.hpp"

namespace mglift {

// Exact finite-dimensional linear image  z' = A z + B U,  y = C z  of the
// surrogate-mode microgrid, built analytically from the network description.
//
// Observable layout (flat positions):
//   [ x_L1 (10) | x_L2..x_Lm (9 each) | z_pq,1..m (6 each) | x_net | z_net1
//     | z_net2 ]
// with x_L1 = [phi_d, phi_q, gamma_d, gamma_q, i_ld, i_lq, v_od, v_oq, i_od,
// i_oq] for the reference DER, x_Li = [delta, phi..., v_oq] for the others
// (their output currents live in x_net), z_pq,i = [P, Q, dP, dQ, d2P, d2Q],
// and x_net = [i_o,2 .. i_o,m, i_line,1 .. i_line,q] as (d, q) pairs followed
// by its first and second derivative chains.
//
// Input layout: U = [u (m) | U_pq,1..m (2 each) | U_net].
class LiftedModel {
 public:
  explicit LiftedModel(const MgParams& params);

  // z = g(x): identity observables plus derivative chains (independent of u).
  Eigen::VectorXd lift(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

  // U(x, u): chain closure inputs; affine in u.
  Eigen::VectorXd lifted_input(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u) const;

  // B U = F(x) + script_b(x) u exactly; script_b depends on the state only
  // through the DER output currents.
  void decompose(const Eigen::VectorXd& x, Eigen::VectorXd& f_part,
                 Eigen::MatrixXd& script_b) const;

  // Reads the state-resident observables back out of z (the reference angle,
  // which is not an observable, is restored as 0).
  Eigen::VectorXd extract_state(const Eigen::VectorXd& z) const;

  const MgParams& params() const { return params_; }
  const StateIndex& state_index() const { return idx_; }
  const Model& surrogate() const { return surr_; }

  // dimensions and offsets
  int N = 0, M = 0, m = 0, q = 0, nnet = 0;
  int xl(int i) const { return xl_off_[i]; }
  int zpq(int i) const { return zpq_off_[i]; }
  int xnet() const { return xnet_off_; }
  int znet1() const { return znet1_off_; }
  int znet2() const { return znet2_off_; }
  // offsets inside the x_net block
  int net_io(int i) const { return 2 * (i - 1); }  // DER i >= 1 (0 = reference)
  int net_line(int e) const { return 2 * (m - 1) + 2 * e; }
  int ucol_u(int i) const { return i; }
  int ucol_pq(int i) const { return m + 2 * i; }
  int ucol_net() const { return 3 * m; }

  // assembled system
  Eigen::MatrixXd A, B, C;
  // network building blocks (x_net' = (A_net + D(delta)) x_net + H xi)
  Eigen::MatrixXd A_net, H;
  std::vector<Eigen::MatrixXd> d_pat;  // D(v) = sum_i v_i * d_pat[i], i >= 1
  Eigen::MatrixXd bbar_net;            // direct u feed into xi''
  Eigen::MatrixXd B1, B2, B3;          // column blocks of B
  Eigen::MatrixXd b3h_bbar;            // constant network part of script_b

  // bookkeeping
  std::vector<std::string> obs_names;
  std::vector<int> x_of_obs;       // flat state index per observable, -1 = chain
  std::vector<int> xi_state;       // flat state indices of xi entries

 private:
  Eigen::MatrixXd d_of(const Eigen::VectorXd& v) const;  // D(v)
  void chain_values(const Eigen::VectorXd& x, const Eigen::VectorXd& xdot,
                    Eigen::VectorXd& znet1_out,
                    Eigen::VectorXd& znet2_out) const;

  MgParams params_;
  StateIndex idx_;
  Model surr_;
  std::vector<int> xl_off_, zpq_off_;
  std::vector<int> net_state_;  // flat state index per x_net entry
  int xnet_off_ = 0, znet1_off_ = 0, znet2_off_ = 0;
};

// Builds the lifted model; requires every load to be resistive.
LiftedModel build_lifted(const MgParams& params);

}  // namespace mglift

#endif  // MGLIFT_LIFT_HPP
