/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/lift.hpp"

#include <cstdio>

#include "mglift/errors.hpp"

namespace mglift {

namespace {

constexpr int kXl1Width = 10;  // [phi_d..i_oq] of the reference DER
constexpr int kXlWidth = 9;    // [delta, phi_d..v_oq] of the others
constexpr int kZpqWidth = 6;   // [P, Q, dP, dQ, d2P, d2Q]

// x_L symbol lists, in block order (P and Q live in z_pq instead).
constexpr DerStateSym kXl1Syms[kXl1Width] = {kPhiD, kPhiQ, kGamD, kGamQ, kIlD,
                                             kIlQ,  kVoD,  kVoQ,  kIoD,  kIoQ};
constexpr DerStateSym kXlSyms[kXlWidth] = {kDelta, kPhiD, kPhiQ, kGamD, kGamQ,
                                           kIlD,   kIlQ,  kVoD,  kVoQ};

}  // namespace

LiftedModel::LiftedModel(const MgParams& params)
    : params_(params), idx_(params), surr_(params, DynamicsMode::Surrogate) {
  for (std::size_t l = 0; l < params_.loads.size(); ++l) {
    if (params_.loads[l].kind == LoadKind::RL) {
      char msg[256];
      std::snprintf(msg, sizeof msg,
                    "lifted model: cannot place the RL load %zu at bus %d; a "
                    "dynamic load current has no slot in the network "
                    "observable block (model it as resistive or simulate the "
                    "full dynamics)",
                    l + 1, params_.loads[l].bus + 1);
      throw ConfigError(msg);
    }
  }

  m = idx_.m();
  q = idx_.q();
  nnet = 2 * (m - 1) + 2 * q;
  N = kXl1Width + kXlWidth * (m - 1) + kZpqWidth * m + 3 * nnet;
  M = 3 * m + nnet;

  xl_off_.resize(m);
  zpq_off_.resize(m);
  xl_off_[0] = 0;
  for (int i = 1; i < m; ++i) xl_off_[i] = kXl1Width + kXlWidth * (i - 1);
  const int zpq0 = kXl1Width + kXlWidth * (m - 1);
  for (int i = 0; i < m; ++i) zpq_off_[i] = zpq0 + kZpqWidth * i;
  xnet_off_ = zpq0 + kZpqWidth * m;
  znet1_off_ = xnet_off_ + nnet;
  znet2_off_ = znet1_off_ + nnet;

  // flat state indices behind the x_net block and the boundary vector xi
  net_state_.clear();
  for (int i = 1; i < m; ++i) {
    net_state_.push_back(idx_.der(i, kIoD));
    net_state_.push_back(idx_.der(i, kIoQ));
  }
  for (int e = 0; e < q; ++e) {
    net_state_.push_back(idx_.line(e));
    net_state_.push_back(idx_.line(e) + 1);
  }
  xi_state.clear();
  xi_state.push_back(idx_.der(0, kIoD));
  xi_state.push_back(idx_.der(0, kIoQ));
  for (int i = 1; i < m; ++i) {
    xi_state.push_back(idx_.der(i, kVoD));
    xi_state.push_back(idx_.der(i, kVoQ));
  }
  const int nxi = 2 * m;

  // observable names and the state they mirror (-1 for chain entries)
  const std::vector<std::string>& snames = idx_.names();
  obs_names.assign(N, std::string());
  x_of_obs.assign(N, -1);
  for (int s = 0; s < kXl1Width; ++s) {
    x_of_obs[xl_off_[0] + s] = idx_.der(0, kXl1Syms[s]);
  }
  for (int i = 1; i < m; ++i) {
    for (int s = 0; s < kXlWidth; ++s) {
      x_of_obs[xl_off_[i] + s] = idx_.der(i, kXlSyms[s]);
    }
  }
  for (int i = 0; i < m; ++i) {
    x_of_obs[zpq_off_[i] + 0] = idx_.der(i, kP);
    x_of_obs[zpq_off_[i] + 1] = idx_.der(i, kQ);
  }
  for (int r = 0; r < nnet; ++r) x_of_obs[xnet_off_ + r] = net_state_[r];
  for (int j = 0; j < N; ++j) {
    if (x_of_obs[j] >= 0) obs_names[j] = snames[x_of_obs[j]];
  }
  for (int i = 0; i < m; ++i) {
    const std::string p_name = snames[idx_.der(i, kP)];
    const std::string q_name = snames[idx_.der(i, kQ)];
    obs_names[zpq_off_[i] + 2] = p_name + "_dot";
    obs_names[zpq_off_[i] + 3] = q_name + "_dot";
    obs_names[zpq_off_[i] + 4] = p_name + "_ddot";
    obs_names[zpq_off_[i] + 5] = q_name + "_ddot";
  }
  for (int r = 0; r < nnet; ++r) {
    obs_names[znet1_off_ + r] = snames[net_state_[r]] + "_dot";
    obs_names[znet2_off_ + r] = snames[net_state_[r]] + "_ddot";
  }

  // ---- network block: x_net' = (A_net + D(delta)) x_net + H xi ----
  const double wn = params_.omega_n;
  A_net = Eigen::MatrixXd::Zero(nnet, nnet);
  H = Eigen::MatrixXd::Zero(nnet, nxi);
  d_pat.assign(m, Eigen::MatrixXd::Zero(nnet, nnet));

  for (int i = 1; i < m; ++i) {  // output current of DER i (not the reference)
    const DerParams& d = params_.ders[i];
    const DerCoeffs& c = params_.coeffs[i];
    const int r = net_io(i);
    A_net(r, r) = -c.a[8];
    A_net(r, r + 1) = wn;
    A_net(r + 1, r + 1) = -c.a[8];
    A_net(r + 1, r) = -wn;
    H(r, 2 * i) = 1.0 / d.L_c;
    H(r + 1, 2 * i + 1) = 1.0 / d.L_c;
    for (const auto& [e, s] : params_.lines_at_bus[d.bus]) {
      A_net(r, net_line(e)) -= s * c.a[9];
      A_net(r + 1, net_line(e) + 1) -= s * c.a[9];
      // local-frame rotation of the bus voltage, linear in delta_i
      d_pat[i](r, net_line(e) + 1) -= s * c.a[9];
      d_pat[i](r + 1, net_line(e)) += s * c.a[9];
    }
  }
  for (int e = 0; e < q; ++e) {
    const LineParams& ln = params_.lines[e];
    const int r = net_line(e);
    A_net(r, r) -= ln.r_line / ln.L_line;
    A_net(r + 1, r + 1) -= ln.r_line / ln.L_line;
    A_net(r, r + 1) += wn;
    A_net(r + 1, r) -= wn;
    const std::pair<int, double> ends[2] = {{ln.from_bus, 1.0},
                                            {ln.to_bus, -1.0}};
    for (const auto& [k, sig] : ends) {
      const double w = sig * params_.rho_surrogate[k] / ln.L_line;
      for (const auto& [e2, s2] : params_.lines_at_bus[k]) {
        A_net(r, net_line(e2)) += w * s2;
        A_net(r + 1, net_line(e2) + 1) += w * s2;
      }
      const int j = params_.der_at_bus[k];
      if (j == 0) {  // reference DER current enters through xi
        H(r, 0) += w;
        H(r + 1, 1) += w;
      } else if (j > 0) {
        A_net(r, net_io(j)) += w;
        A_net(r + 1, net_io(j) + 1) += w;
        d_pat[j](r, net_io(j) + 1) -= w;
        d_pat[j](r + 1, net_io(j)) += w;
      }
    }
  }

  // direct u feed into xi'' (only v_od'' of the non-reference DERs has one)
  bbar_net = Eigen::MatrixXd::Zero(nxi, m);
  for (int i = 1; i < m; ++i) {
    bbar_net(2 * i, i) = params_.coeffs[i].b / params_.ders[i].C_f;
  }

  // ---- lifted system matrices ----
  A = Eigen::MatrixXd::Zero(N, N);
  B1 = Eigen::MatrixXd::Zero(N, m);
  B2 = Eigen::MatrixXd::Zero(N, 2 * m);
  B3 = Eigen::MatrixXd::Zero(N, nnet);

  for (int i = 0; i < m; ++i) {
    const DerParams& d = params_.ders[i];
    const DerCoeffs& c = params_.coeffs[i];
    const int o = xl_off_[i];
    const int zp = zpq_off_[i];
    const int zq = zp + 1;  // column of Q_i
    // block-local columns; the output current of DER i >= 1 sits in x_net
    const int vod = o + (i == 0 ? 6 : 7);
    const int voq = vod + 1;
    const int iod = (i == 0) ? o + 8 : xnet_off_ + net_io(i);
    const int ioq = iod + 1;
    int row = o;
    if (i > 0) {  // angle relative to the reference DER
      A(row, zpq_off_[0]) = params_.ders[0].D_P;
      A(row, zp) = -d.D_P;
      ++row;
    }
    A(row, vod) = -1.0;  // phi_d' = u - D_Q Q - v_od
    A(row, zq) = -d.D_Q;
    B1(row, i) = 1.0;
    ++row;
    A(row, voq) = -1.0;  // phi_q'
    ++row;
    A(row, row - 2) = d.K_iv;  // gamma_d' = i_ld* - i_ld
    A(row, vod) = -d.K_pv;
    A(row, voq) = -params_.omega_n * d.C_f;
    A(row, iod) = d.F;
    A(row, row + 2) = -1.0;
    A(row, zq) = -d.K_pv * d.D_Q;
    B1(row, i) = d.K_pv;
    ++row;
    A(row, row - 2) = d.K_iv;  // gamma_q'
    A(row, vod) = params_.omega_n * d.C_f;
    A(row, voq) = -d.K_pv;
    A(row, ioq) = d.F;
    A(row, row + 2) = -1.0;
    ++row;
    A(row, row - 4) = c.a[2];  // i_ld' (collected coefficients)
    A(row, row - 2) = c.a[3];
    A(row, row) = -c.a[4];
    A(row, vod) = -c.a[5];
    A(row, voq) = -c.a[6];
    A(row, iod) = c.a[7];
    A(row, zq) = -c.a[1];
    B1(row, i) = c.b;
    ++row;
    A(row, row - 4) = c.a[2];  // i_lq'
    A(row, row - 2) = c.a[3];
    A(row, row) = -c.a[4];
    A(row, vod) = c.a[6];
    A(row, voq) = -c.a[5];
    A(row, ioq) = c.a[7];
    ++row;
    A(row, row - 2) = 1.0 / d.C_f;  // v_od' = (i_ld - i_od)/C_f + wn v_oq
    A(row, iod) = -1.0 / d.C_f;
    A(row, voq) = params_.omega_n;
    ++row;
    A(row, row - 2) = 1.0 / d.C_f;  // v_oq'
    A(row, ioq) = -1.0 / d.C_f;
    A(row, vod) = -params_.omega_n;
    ++row;
    if (i == 0) {  // reference output current stays in x_L1
      A(row, vod) = 1.0 / d.L_c;
      A(row, iod) = -c.a[8];
      A(row, ioq) = params_.omega_n;
      A(row + 1, voq) = 1.0 / d.L_c;
      A(row + 1, ioq) = -c.a[8];
      A(row + 1, iod) = -params_.omega_n;
      for (const auto& [e, s] : params_.lines_at_bus[d.bus]) {
        A(row, xnet_off_ + net_line(e)) -= s * c.a[9];
        A(row + 1, xnet_off_ + net_line(e) + 1) -= s * c.a[9];
      }
    }
    // z_pq chain: P' = dP, dP' = d2P, d2P' = -w_c d2P + U_pq
    A(zp, zp + 2) = 1.0;
    A(zp + 1, zp + 3) = 1.0;
    A(zp + 2, zp + 4) = 1.0;
    A(zp + 3, zp + 5) = 1.0;
    A(zp + 4, zp + 4) = -d.omega_c;
    A(zp + 5, zp + 5) = -d.omega_c;
    B2(zp + 4, 2 * i) = 1.0;
    B2(zp + 5, 2 * i + 1) = 1.0;
  }

  A.block(xnet_off_, znet1_off_, nnet, nnet).setIdentity();
  A.block(znet1_off_, znet2_off_, nnet, nnet).setIdentity();
  A.block(znet2_off_, znet2_off_, nnet, nnet) = A_net;
  for (int r = 0; r < nnet; ++r) B3(znet2_off_ + r, r) = 1.0;

  B.resize(N, M);
  B << B1, B2, B3;
  b3h_bbar = B3 * (H * bbar_net);

  C = Eigen::MatrixXd::Zero(m, N);
  for (int i = 0; i < m; ++i) {
    C(i, xl_off_[i] + (i == 0 ? 6 : 7)) = 1.0;
  }
}

Eigen::MatrixXd LiftedModel::d_of(const Eigen::VectorXd& v) const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(nnet, nnet);
  for (int i = 1; i < m; ++i) d += v[i] * d_pat[i];
  return d;
}

void LiftedModel::chain_values(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& xdot,
                               Eigen::VectorXd& znet1_out,
                               Eigen::VectorXd& znet2_out) const {
  Eigen::VectorXd xnet_v(nnet), xnet_d(nnet);
  for (int r = 0; r < nnet; ++r) {
    xnet_v[r] = x[net_state_[r]];
    xnet_d[r] = xdot[net_state_[r]];
  }
  const int nxi = 2 * m;
  Eigen::VectorXd xi(nxi), xi_d(nxi);
  for (int k = 0; k < nxi; ++k) {
    xi[k] = x[xi_state[k]];
    xi_d[k] = xdot[xi_state[k]];
  }
  Eigen::VectorXd delta(m), delta_d(m);
  for (int i = 0; i < m; ++i) {
    delta[i] = x[idx_.der(i, kDelta)];
    delta_d[i] = xdot[idx_.der(i, kDelta)];
  }
  const Eigen::MatrixXd a_d = A_net + d_of(delta);
  znet1_out = a_d * xnet_v + H * xi;
  znet2_out = a_d * znet1_out + d_of(delta_d) * xnet_v + H * xi_d;
}

Eigen::VectorXd LiftedModel::lift(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u) const {
  if (x.size() != idx_.n() || u.size() != m) {
    throw ConfigError("lift: state/input dimension mismatch");
  }
  const Eigen::VectorXd xdot = surr_.rhs(x, u);
  Eigen::VectorXd z(N);
  for (int j = 0; j < N; ++j) {
    if (x_of_obs[j] >= 0) z[j] = x[x_of_obs[j]];
  }
  for (int i = 0; i < m; ++i) {
    const int zp = zpq_off_[i];
    const double wc = params_.ders[i].omega_c;
    const double vod = x[idx_.der(i, kVoD)], voq = x[idx_.der(i, kVoQ)];
    const double iod = x[idx_.der(i, kIoD)], ioq = x[idx_.der(i, kIoQ)];
    const double vod_d = xdot[idx_.der(i, kVoD)];
    const double voq_d = xdot[idx_.der(i, kVoQ)];
    const double iod_d = xdot[idx_.der(i, kIoD)];
    const double ioq_d = xdot[idx_.der(i, kIoQ)];
    const double z1d = wc * (vod * iod + voq * ioq - x[idx_.der(i, kP)]);
    const double z1q = wc * (voq * iod - vod * ioq - x[idx_.der(i, kQ)]);
    z[zp + 2] = z1d;
    z[zp + 3] = z1q;
    // product rule on W(v_o) i_o, then the filter pole closes the chain
    z[zp + 4] =
        wc * (vod_d * iod + voq_d * ioq + vod * iod_d + voq * ioq_d) - wc * z1d;
    z[zp + 5] =
        wc * (voq_d * iod - vod_d * ioq + voq * iod_d - vod * ioq_d) - wc * z1q;
  }
  if (nnet > 0) {
    Eigen::VectorXd zn1, zn2;
    chain_values(x, xdot, zn1, zn2);
    z.segment(znet1_off_, nnet) = zn1;
    z.segment(znet2_off_, nnet) = zn2;
  }
  return z;
}

Eigen::VectorXd LiftedModel::lifted_input(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& u) const {
  if (x.size() != idx_.n() || u.size() != m) {
    throw ConfigError("lifted_input: state/input dimension mismatch");
  }
  const Eigen::VectorXd xdot = surr_.rhs(x, u);
  const Eigen::VectorXd xdd =
      surr_.rhs_jvp(x, u, xdot, Eigen::VectorXd::Zero(m));
  Eigen::VectorXd bigu(M);
  bigu.head(m) = u;
  for (int i = 0; i < m; ++i) {
    const double wc = params_.ders[i].omega_c;
    const int jv = idx_.der(i, kVoD), ji = idx_.der(i, kIoD);
    const double vod = x[jv], voq = x[jv + 1];
    const double iod = x[ji], ioq = x[ji + 1];
    const double vod_d = xdot[jv], voq_d = xdot[jv + 1];
    const double iod_d = xdot[ji], ioq_d = xdot[ji + 1];
    const double vod_dd = xdd[jv], voq_dd = xdd[jv + 1];
    const double iod_dd = xdd[ji], ioq_dd = xdd[ji + 1];
    // second derivative of W(v_o) i_o
    bigu[ucol_pq(i)] = wc * (vod_dd * iod + voq_dd * ioq +
                             2.0 * (vod_d * iod_d + voq_d * ioq_d) +
                             vod * iod_dd + voq * ioq_dd);
    bigu[ucol_pq(i) + 1] = wc * (voq_dd * iod - vod_dd * ioq +
                                 2.0 * (voq_d * iod_d - vod_d * ioq_d) +
                                 voq * iod_dd - vod * ioq_dd);
  }
  if (nnet > 0) {
    Eigen::VectorXd zn1, zn2;
    chain_values(x, xdot, zn1, zn2);
    Eigen::VectorXd xnet_v(nnet);
    for (int r = 0; r < nnet; ++r) xnet_v[r] = x[net_state_[r]];
    const int nxi = 2 * m;
    Eigen::VectorXd xi_dd(nxi);
    for (int k = 0; k < nxi; ++k) xi_dd[k] = xdd[xi_state[k]];
    Eigen::VectorXd delta(m), delta_d(m), delta_dd(m);
    for (int i = 0; i < m; ++i) {
      delta[i] = x[idx_.der(i, kDelta)];
      delta_d[i] = xdot[idx_.der(i, kDelta)];
      delta_dd[i] = xdd[idx_.der(i, kDelta)];
    }
    bigu.segment(ucol_net(), nnet) = d_of(delta_dd) * xnet_v +
                                     2.0 * (d_of(delta_d) * zn1) +
                                     d_of(delta) * zn2 + H * xi_dd;
  }
  return bigu;
}

void LiftedModel::decompose(const Eigen::VectorXd& x, Eigen::VectorXd& f_part,
                            Eigen::MatrixXd& script_b) const {
  f_part = B * lifted_input(x, Eigen::VectorXd::Zero(m));
  Eigen::MatrixXd bpq = Eigen::MatrixXd::Zero(2 * m, m);
  for (int i = 0; i < m; ++i) {
    const double g =
        params_.coeffs[i].b * params_.ders[i].omega_c / params_.ders[i].C_f;
    bpq(2 * i, i) = g * x[idx_.der(i, kIoD)];
    bpq(2 * i + 1, i) = -g * x[idx_.der(i, kIoQ)];
  }
  script_b = B1 + B2 * bpq + b3h_bbar;
}

Eigen::VectorXd LiftedModel::extract_state(const Eigen::VectorXd& z) const {
  if (z.size() != N) {
    throw ConfigError("extract_state: observable dimension mismatch");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(idx_.n());
  for (int j = 0; j < N; ++j) {
    if (x_of_obs[j] >= 0) x[x_of_obs[j]] = z[j];
  }
  return x;
}

LiftedModel build_lifted(const MgParams& params) { return LiftedModel(params); }

}  // namespace mglift
