/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/model.hpp"

#include <array>
#include <cmath>
#include <string>

#include "mglift/errors.hpp"

namespace mglift {

namespace {

// Forward-mode scalar: value and one tangent. The field is polynomial in the
// states (exactly quadratic in surrogate mode), so this propagates exact
// directional derivatives.
struct Dual {
  double v = 0.0;
  double t = 0.0;
  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit for constant mixing
  Dual(double value, double tangent) : v(value), t(tangent) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.t + b.t}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.t - b.t}; }
inline Dual operator-(Dual a) { return {-a.v, -a.t}; }
inline Dual operator*(Dual a, Dual b) {
  return {a.v * b.v, a.v * b.t + a.t * b.v};
}
inline Dual operator/(Dual a, double c) { return {a.v / c, a.t / c}; }
inline Dual& operator+=(Dual& a, Dual b) {
  a = a + b;
  return a;
}
inline Dual& operator-=(Dual& a, Dual b) {
  a = a - b;
  return a;
}
inline Dual sin(Dual a) { return {std::sin(a.v), std::cos(a.v) * a.t}; }
inline Dual cos(Dual a) { return {std::cos(a.v), -std::sin(a.v) * a.t}; }

template <typename S>
using Pair = std::array<S, 2>;

// Global-frame bus voltage pieces. Full mode: v0 holds the bus voltage with
// rotated DER currents, RL load draw subtracted, shunt rho (RL loads excluded
// from rho). Surrogate mode: v0 is the zeroth-order piece (DER currents taken
// as global), v1 the first-order angle correction rho * sum_j delta_j J' i_oj,
// both with the all-resistive shunt rho.
template <typename S>
void bus_voltages_core(const MgParams& pr, const StateIndex& ix,
                       DynamicsMode mode, const S* x, std::vector<Pair<S>>& v0,
                       std::vector<Pair<S>>& v1) {
  using std::cos;
  using std::sin;
  const bool full = mode == DynamicsMode::Full;
  v0.assign(pr.n_bus, {S(0.0), S(0.0)});
  v1.assign(pr.n_bus, {S(0.0), S(0.0)});
  for (int k = 0; k < pr.n_bus; ++k) {
    S sd(0.0), sq(0.0);
    const int j = pr.der_at_bus[k];
    if (j >= 0) {
      const S iod = x[ix.der(j, kIoD)];
      const S ioq = x[ix.der(j, kIoQ)];
      if (full) {
        const S c = cos(x[ix.der(j, kDelta)]);
        const S s = sin(x[ix.der(j, kDelta)]);
        sd += c * iod - s * ioq;
        sq += s * iod + c * ioq;
      } else {
        sd += iod;
        sq += ioq;
      }
    }
    for (const auto& [e, sg] : pr.lines_at_bus[k]) {
      const double sgn = static_cast<double>(sg);
      sd += S(sgn) * x[ix.line(e)];
      sq += S(sgn) * x[ix.line(e) + 1];
    }
    if (full) {
      for (int r : pr.rl_at_bus[k]) {
        sd -= x[ix.rl(r)];
        sq -= x[ix.rl(r) + 1];
      }
    }
    const double rho = full ? pr.rho[k] : pr.rho_surrogate[k];
    v0[k] = {S(rho) * sd, S(rho) * sq};
    if (!full && j >= 0) {
      const S dlt = x[ix.der(j, kDelta)];
      const S iod = x[ix.der(j, kIoD)];
      const S ioq = x[ix.der(j, kIoQ)];
      v1[k] = {S(rho) * (dlt * (-ioq)), S(rho) * (dlt * iod)};
    }
  }
}

template <typename S>
void rhs_core(const MgParams& pr, const StateIndex& ix, DynamicsMode mode,
              const S* x, const S* u, S* dx) {
  using std::cos;
  using std::sin;
  const bool full = mode == DynamicsMode::Full;
  const int m = ix.m(), nq = ix.q(), np = ix.p();
  const double wn = pr.omega_n;
  const double dp1 = pr.ders[0].D_P;
  const S p1 = x[ix.der(0, kP)];

  std::vector<Pair<S>> v0, v1;
  bus_voltages_core(pr, ix, mode, x, v0, v1);

  // Line-frame (global) bus voltages: surrogate keeps the first-order piece.
  std::vector<Pair<S>> vbus(pr.n_bus);
  for (int k = 0; k < pr.n_bus; ++k) {
    if (full)
      vbus[k] = v0[k];
    else
      vbus[k] = {v0[k][0] + v1[k][0], v0[k][1] + v1[k][1]};
  }

  S omega1 = S(wn) - S(dp1) * p1;

  for (int i = 0; i < m; ++i) {
    const DerParams& d = pr.ders[i];
    const int b = ix.der(i);
    const S delta = x[b + kDelta], P = x[b + kP], Q = x[b + kQ];
    const S phi_d = x[b + kPhiD], phi_q = x[b + kPhiQ];
    const S gam_d = x[b + kGamD], gam_q = x[b + kGamQ];
    const S i_ld = x[b + kIlD], i_lq = x[b + kIlQ];
    const S v_od = x[b + kVoD], v_oq = x[b + kVoQ];
    const S i_od = x[b + kIoD], i_oq = x[b + kIoQ];

    const S omega_rot = full ? S(wn) - S(d.D_P) * P : S(wn);

    // DER-local bus voltage.
    const int k = d.bus;
    S vbd, vbq;
    if (full) {
      const S c = cos(delta), s = sin(delta);
      vbd = c * v0[k][0] + s * v0[k][1];
      vbq = -(s * v0[k][0]) + c * v0[k][1];
    } else {
      // v0 + v1 - delta J' v0, the second-order delta*v1 product dropped.
      vbd = v0[k][0] + v1[k][0] + delta * v0[k][1];
      vbq = v0[k][1] + v1[k][1] - delta * v0[k][0];
    }

    dx[b + kDelta] = S(dp1) * p1 - S(d.D_P) * P;
    dx[b + kP] = S(d.omega_c) * (v_od * i_od + v_oq * i_oq - P);
    dx[b + kQ] = S(d.omega_c) * (v_oq * i_od - v_od * i_oq - Q);

    const S vod_ref = u[i] - S(d.D_Q) * Q;
    dx[b + kPhiD] = vod_ref - v_od;
    dx[b + kPhiQ] = -v_oq;

    const S ild_ref = S(d.F) * i_od - S(wn * d.C_f) * v_oq +
                      S(d.K_pv) * (vod_ref - v_od) + S(d.K_iv) * phi_d;
    const S ilq_ref = S(d.F) * i_oq + S(wn * d.C_f) * v_od -
                      S(d.K_pv) * v_oq + S(d.K_iv) * phi_q;
    dx[b + kGamD] = ild_ref - i_ld;
    dx[b + kGamQ] = ilq_ref - i_lq;

    const S vid = -(S(wn * d.L_f) * i_lq) + S(d.K_pc) * (ild_ref - i_ld) +
                  S(d.K_ic) * gam_d;
    const S viq = S(wn * d.L_f) * i_ld + S(d.K_pc) * (ilq_ref - i_lq) +
                  S(d.K_ic) * gam_q;

    dx[b + kIlD] = (vid - v_od - S(d.r_f) * i_ld) / d.L_f + omega_rot * i_lq;
    dx[b + kIlQ] = (viq - v_oq - S(d.r_f) * i_lq) / d.L_f - omega_rot * i_ld;
    dx[b + kVoD] = (i_ld - i_od) / d.C_f + omega_rot * v_oq;
    dx[b + kVoQ] = (i_lq - i_oq) / d.C_f - omega_rot * v_od;
    dx[b + kIoD] = (v_od - vbd - S(d.r_c) * i_od) / d.L_c + omega_rot * i_oq;
    dx[b + kIoQ] = (v_oq - vbq - S(d.r_c) * i_oq) / d.L_c - omega_rot * i_od;
  }

  const S omega_line = full ? omega1 : S(wn);
  for (int e = 0; e < nq; ++e) {
    const LineParams& l = pr.lines[e];
    const int b = ix.line(e);
    const S ld = x[b], lq = x[b + 1];
    dx[b] = (vbus[l.from_bus][0] - vbus[l.to_bus][0] - S(l.r_line) * ld) /
                l.L_line +
            omega_line * lq;
    dx[b + 1] = (vbus[l.from_bus][1] - vbus[l.to_bus][1] - S(l.r_line) * lq) /
                    l.L_line -
                omega_line * ld;
  }

  for (int r = 0; r < np; ++r) {
    const int b = ix.rl(r);
    if (!full) {
      dx[b] = S(0.0);  // folded into the bus resistance in surrogate mode
      dx[b + 1] = S(0.0);
      continue;
    }
    const LoadParams& l = pr.loads[pr.rl_load_ids[r]];
    const S id = x[b], iq = x[b + 1];
    dx[b] = (vbus[l.bus][0] - S(l.R_load) * id) / l.L_load + omega1 * iq;
    dx[b + 1] = (vbus[l.bus][1] - S(l.R_load) * iq) / l.L_load - omega1 * id;
  }
}

}  // namespace

DerView DerView::from(const Eigen::VectorXd& x, const StateIndex& idx, int i) {
  DerView s;
  const int b = idx.der(i);
  s.delta = x[b + kDelta];
  s.P = x[b + kP];
  s.Q = x[b + kQ];
  s.phi_d = x[b + kPhiD];
  s.phi_q = x[b + kPhiQ];
  s.gam_d = x[b + kGamD];
  s.gam_q = x[b + kGamQ];
  s.i_ld = x[b + kIlD];
  s.i_lq = x[b + kIlQ];
  s.v_od = x[b + kVoD];
  s.v_oq = x[b + kVoQ];
  s.i_od = x[b + kIoD];
  s.i_oq = x[b + kIoQ];
  return s;
}

PowerRates power_filter_rhs(const DerView& s, const DerParams& d) {
  PowerRates r;
  r.dP = d.omega_c * (s.v_od * s.i_od + s.v_oq * s.i_oq - s.P);
  r.dQ = d.omega_c * (s.v_oq * s.i_od - s.v_od * s.i_oq - s.Q);
  return r;
}

DroopRefs droop(const DerView& s, const DerParams& d, double v_set) {
  DroopRefs r;
  r.omega = d.omega_n - d.D_P * s.P;
  r.vod_ref = v_set - d.D_Q * s.Q;
  r.voq_ref = 0.0;
  return r;
}

InnerLoopRates inner_loops(const DerView& s, const DroopRefs& refs,
                           const DerParams& d) {
  InnerLoopRates r;
  r.dphi_d = refs.vod_ref - s.v_od;
  r.dphi_q = refs.voq_ref - s.v_oq;
  r.ild_ref = d.F * s.i_od - d.omega_n * d.C_f * s.v_oq +
              d.K_pv * (refs.vod_ref - s.v_od) + d.K_iv * s.phi_d;
  r.ilq_ref = d.F * s.i_oq + d.omega_n * d.C_f * s.v_od +
              d.K_pv * (refs.voq_ref - s.v_oq) + d.K_iv * s.phi_q;
  r.dgam_d = r.ild_ref - s.i_ld;
  r.dgam_q = r.ilq_ref - s.i_lq;
  r.vid_ref = -d.omega_n * d.L_f * s.i_lq + d.K_pc * (r.ild_ref - s.i_ld) +
              d.K_ic * s.gam_d;
  r.viq_ref = d.omega_n * d.L_f * s.i_ld + d.K_pc * (r.ilq_ref - s.i_lq) +
              d.K_ic * s.gam_q;
  return r;
}

Eigen::VectorXd complete_initial_state(const MgParams& params,
                                       const InitialSpec& ic) {
  const StateIndex idx(params);
  const int m = idx.m(), q = idx.q(), p = idx.p();
  auto need = [&](const std::vector<double>& v, int len, const char* what) {
    if (static_cast<int>(v.size()) != len)
      throw ConfigError(std::string("initial state: '") + what + "' needs " +
                        std::to_string(len) + " entries, got " +
                        std::to_string(v.size()));
  };
  need(ic.v_od, m, "v_od");
  need(ic.v_oq, m, "v_oq");
  need(ic.i_od, m, "i_od");
  need(ic.i_oq, m, "i_oq");
  need(ic.i_ld, m, "i_ld");
  need(ic.i_lq, m, "i_lq");
  need(ic.delta, m, "delta");
  need(ic.i_line_d, q, "i_line_d");
  need(ic.i_line_q, q, "i_line_q");
  if (!ic.i_load_d.empty()) need(ic.i_load_d, p, "i_load_d");
  if (!ic.i_load_q.empty()) need(ic.i_load_q, p, "i_load_q");

  Eigen::VectorXd x = Eigen::VectorXd::Zero(idx.n());
  for (int i = 0; i < m; ++i) {
    const DerParams& d = params.ders[i];
    const int b = idx.der(i);
    const double w0 = ic.omega0;
    x[b + kDelta] = ic.delta[i];
    x[b + kVoD] = ic.v_od[i];
    x[b + kVoQ] = ic.v_oq[i];
    x[b + kIoD] = ic.i_od[i];
    x[b + kIoQ] = ic.i_oq[i];
    x[b + kIlD] = ic.i_ld[i];
    x[b + kIlQ] = ic.i_lq[i];
    // Droop equilibria at frequency omega0.
    x[b + kP] = d.D_P > 0.0 ? (params.omega_n - w0) / d.D_P : 0.0;
    x[b + kQ] = d.D_Q > 0.0 ? (d.v_set - ic.v_od[i]) / d.D_Q : 0.0;
    // Inner loops at their tracking equilibria.
    x[b + kPhiD] =
        (ic.i_ld[i] - d.F * ic.i_od[i] + params.omega_n * d.C_f * ic.v_oq[i]) /
        d.K_iv;
    x[b + kPhiQ] = (ic.i_lq[i] - d.F * ic.i_oq[i] -
                    params.omega_n * d.C_f * ic.v_od[i] +
                    d.K_pv * ic.v_oq[i]) /
                   d.K_iv;
    // Demanded voltage equals the filter's steady requirement at omega0.
    x[b + kGamD] = (d.r_f * ic.i_ld[i] + ic.v_od[i] +
                    (params.omega_n - w0) * d.L_f * ic.i_lq[i]) /
                   d.K_ic;
    x[b + kGamQ] = (d.r_f * ic.i_lq[i] + ic.v_oq[i] +
                    (w0 - params.omega_n) * d.L_f * ic.i_ld[i]) /
                   d.K_ic;
  }
  for (int e = 0; e < q; ++e) {
    x[idx.line(e)] = ic.i_line_d[e];
    x[idx.line(e) + 1] = ic.i_line_q[e];
  }
  for (int r = 0; r < p; ++r) {
    x[idx.rl(r)] = ic.i_load_d.empty() ? 0.0 : ic.i_load_d[r];
    x[idx.rl(r) + 1] = ic.i_load_q.empty() ? 0.0 : ic.i_load_q[r];
  }
  return x;
}

Model::Model(MgParams params, DynamicsMode mode)
    : params_(std::move(params)), idx_(params_), mode_(mode) {}

void Model::rhs(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                Eigen::VectorXd& dx) const {
  if (x.size() != idx_.n() || u.size() != idx_.m())
    throw ConfigError("rhs: state/input dimension mismatch");
  dx.resize(idx_.n());
  rhs_core<double>(params_, idx_, mode_, x.data(), u.data(), dx.data());
}

Eigen::VectorXd Model::rhs(const Eigen::VectorXd& x,
                           const Eigen::VectorXd& u) const {
  Eigen::VectorXd dx(idx_.n());
  rhs(x, u, dx);
  return dx;
}

Eigen::VectorXd Model::rhs_jvp(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u,
                               const Eigen::VectorXd& vx,
                               const Eigen::VectorXd& vu) const {
  const int n = idx_.n(), m = idx_.m();
  if (x.size() != n || u.size() != m || vx.size() != n || vu.size() != m)
    throw ConfigError("rhs_jvp: dimension mismatch");
  std::vector<Dual> xd(n), ud(m), dxd(n);
  for (int i = 0; i < n; ++i) xd[i] = {x[i], vx[i]};
  for (int i = 0; i < m; ++i) ud[i] = {u[i], vu[i]};
  rhs_core<Dual>(params_, idx_, mode_, xd.data(), ud.data(), dxd.data());
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = dxd[i].t;
  return out;
}

Eigen::MatrixXd Model::rhs_jacobian(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& u) const {
  const int n = idx_.n();
  Eigen::MatrixXd j(n, n);
  Eigen::VectorXd vx = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd vu = Eigen::VectorXd::Zero(idx_.m());
  for (int c = 0; c < n; ++c) {
    vx[c] = 1.0;
    j.col(c) = rhs_jvp(x, u, vx, vu);
    vx[c] = 0.0;
  }
  return j;
}

Eigen::MatrixXd Model::bus_voltages(const Eigen::VectorXd& x) const {
  if (x.size() != idx_.n())
    throw ConfigError("bus_voltages: state dimension mismatch");
  std::vector<Pair<double>> v0, v1;
  bus_voltages_core<double>(params_, idx_, mode_, x.data(), v0, v1);
  Eigen::MatrixXd out(params_.n_bus, 2);
  for (int k = 0; k < params_.n_bus; ++k) {
    if (mode_ == DynamicsMode::Full) {
      out(k, 0) = v0[k][0];
      out(k, 1) = v0[k][1];
    } else {
      out(k, 0) = v0[k][0] + v1[k][0];
      out(k, 1) = v0[k][1] + v1[k][1];
    }
  }
  return out;
}

}  // namespace mglift
