/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mglift/errors.hpp"
#include "mglift/model.hpp"
#include "testutil.hpp"

using namespace mglift;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MgParams test_params(double r_n = 1000.0) {
  return build_params(testutil::test_system(r_n));
}

VectorXd random_state(const StateIndex& idx, unsigned seed,
                      bool zero_delta1 = true) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorXd x(idx.n());
  for (int i = 0; i < idx.n(); ++i) x[i] = u(gen);
  // Keep angles small and scale electrical states realistically.
  for (int i = 0; i < idx.m(); ++i) {
    x[idx.der(i, kDelta)] *= 0.02;
    x[idx.der(i, kP)] *= 2000.0;
    x[idx.der(i, kQ)] *= 1000.0;
    x[idx.der(i, kVoD)] = 380.0 + 5.0 * x[idx.der(i, kVoD)];
    x[idx.der(i, kVoQ)] *= 5.0;
    x[idx.der(i, kIoD)] *= 15.0;
    x[idx.der(i, kIoQ)] *= 15.0;
    x[idx.der(i, kIlD)] *= 15.0;
    x[idx.der(i, kIlQ)] *= 15.0;
  }
  if (zero_delta1) x[idx.der(0, kDelta)] = 0.0;
  return x;
}

VectorXd u380(int m) { return VectorXd::Constant(m, 380.0); }

}  // namespace

TEST_CASE("build_params derives the test-system dimensions") {
  MgParams p = test_params();
  CHECK(p.m() == 3);
  CHECK(p.q() == 2);
  CHECK(p.p() == 0);
  StateIndex idx(p);
  CHECK(idx.n() == 43);
  CHECK(p.lines[0].L_line == doctest::Approx(0.1 / testutil::kOmegaN));
  CHECK(p.n_bus == 3);
  // Shunt resistances: r_n || R_load where a load exists.
  CHECK(p.rho[0] == doctest::Approx(1000.0 * 25.0 / 1025.0));
  CHECK(p.rho[1] == doctest::Approx(1000.0));
  CHECK(p.rho[2] == doctest::Approx(1000.0 * 20.0 / 1020.0));
  CHECK(p.rho_surrogate[0] == doctest::Approx(p.rho[0]));
}

TEST_CASE("build_params computes the DER and line coefficients") {
  MgParams p = test_params();
  const DerParams& d = p.ders[0];
  const DerCoeffs& c = p.coeffs[0];
  CHECK(c.a[1] == doctest::Approx(d.K_pc * d.K_pv * d.D_Q / d.L_f));
  CHECK(c.a[2] == doctest::Approx(d.K_pc * d.K_iv / d.L_f));
  CHECK(c.a[3] == doctest::Approx(d.K_ic / d.L_f));
  CHECK(c.a[4] == doctest::Approx((d.r_f + d.K_pc) / d.L_f));
  CHECK(c.a[5] == doctest::Approx((1.0 + d.K_pc * d.K_pv) / d.L_f));
  CHECK(c.a[6] == doctest::Approx(d.K_pc * p.omega_n * d.C_f / d.L_f));
  CHECK(c.a[7] == doctest::Approx(d.K_pc * d.F / d.L_f));
  CHECK(c.a[8] == doctest::Approx((d.r_c + p.rho[0]) / d.L_c));
  CHECK(c.a[9] == doctest::Approx(p.rho[0] / d.L_c));
  CHECK(c.b == doctest::Approx(d.K_pc * d.K_pv / d.L_f));
  // Line damping includes both end buses' shunts.
  CHECK(p.line_a_diag[0] ==
        doctest::Approx((0.23 + p.rho[0] + p.rho[1]) / p.lines[0].L_line));
  CHECK(p.line_a_diag[1] ==
        doctest::Approx((0.35 + p.rho[1] + p.rho[2]) / p.lines[1].L_line));
}

TEST_CASE("build_params validation errors") {
  MgDescription g = testutil::test_system();
  g.ders[0].L_f = 0.0;
  CHECK_THROWS_AS(build_params(g), ConfigError);

  g = testutil::test_system();
  g.ders.clear();
  g.lines.clear();
  g.loads.clear();
  CHECK_THROWS_AS(build_params(g), ConfigError);

  g = testutil::test_system();
  g.ders[1].bus = 0;  // two DERs on one bus
  CHECK_THROWS_AS(build_params(g), ConfigError);

  g = testutil::test_system();
  g.lines[0].to_bus = 0;  // degenerate line
  CHECK_THROWS_AS(build_params(g), ConfigError);

  // Bus 1 becomes unreferenced: dangling intermediate id.
  g = testutil::test_system();
  g.ders[1].bus = 3;
  g.lines[0].to_bus = 3;
  g.lines[1].from_bus = 3;
  CHECK_THROWS_AS(build_params(g), ConfigError);
}

TEST_CASE("state index layout and names") {
  MgParams p = test_params();
  StateIndex idx(p);
  CHECK(idx.der(0, kDelta) == 0);
  CHECK(idx.der(1, kP) == 14);
  CHECK(idx.der(2, kIoQ) == 38);
  CHECK(idx.line(0) == 39);
  CHECK(idx.line(1) == 41);
  CHECK(idx.names()[0] == "delta_1");
  CHECK(idx.names()[39] == "i_line_1_D");
  CHECK(idx.find("v_od_2") == idx.der(1, kVoD));
  CHECK(idx.find("nope") == -1);
}

TEST_CASE("power filter rates") {
  DerParams d = testutil::benchmark_der(0);
  DerView s;
  SUBCASE("zero state gives zero rates") {
    PowerRates r = power_filter_rhs(s, d);
    CHECK(r.dP == 0.0);
    CHECK(r.dQ == 0.0);
  }
  SUBCASE("filter equilibria at the published operating point") {
    s.v_od = 380.8;
    s.v_oq = 0.0;
    s.i_od = 11.4;
    s.i_oq = 0.4;
    s.P = 380.8 * 11.4;  // 4341.12 W instantaneous
    PowerRates r = power_filter_rhs(s, d);
    CHECK(r.dP == doctest::Approx(0.0).epsilon(1e-12));
    d.omega_c = 31.4;
    s.Q = 0.0;
    r = power_filter_rhs(s, d);
    CHECK(r.dQ == doctest::Approx(31.4 * (-380.8 * 0.4)));
  }
  SUBCASE("active power is exactly v_od*i_od when v_oq = 0") {
    s.v_od = 123.456;
    s.v_oq = 0.0;
    s.i_od = 7.89;
    s.i_oq = -3.21;
    s.P = 0.0;
    PowerRates r = power_filter_rhs(s, d);
    CHECK(r.dP == d.omega_c * (s.v_od * s.i_od));
  }
}

TEST_CASE("droop laws") {
  DerParams d = testutil::benchmark_der(0);
  DerView s;
  DroopRefs r = droop(s, d, d.v_set);
  CHECK(r.omega == d.omega_n);
  CHECK(r.vod_ref == d.v_set);
  CHECK(r.voq_ref == 0.0);

  s.Q = 100.0;
  r = droop(s, d, d.v_set);
  CHECK(r.vod_ref < d.v_set);

  // Completion picks P so the droop returns the published initial frequency.
  MgParams p = test_params();
  VectorXd x0 = complete_initial_state(p, testutil::test_initial());
  StateIndex idx(p);
  for (int i = 0; i < 3; ++i) {
    DerView v = DerView::from(x0, idx, i);
    CHECK(droop(v, p.ders[i], 380.0).omega == doctest::Approx(314.0));
  }
}

TEST_CASE("inner loops") {
  DerParams d = testutil::benchmark_der(0);
  DerView s;
  DroopRefs refs;
  SUBCASE("all zero in, all zero out") {
    InnerLoopRates r = inner_loops(s, refs, d);
    CHECK(r.dphi_d == 0.0);
    CHECK(r.dphi_q == 0.0);
    CHECK(r.dgam_d == 0.0);
    CHECK(r.dgam_q == 0.0);
    CHECK(r.ild_ref == 0.0);
    CHECK(r.vid_ref == 0.0);
  }
  SUBCASE("voltage tracking freezes the phi integrators") {
    s.v_od = 377.0;
    s.v_oq = -2.0;
    refs.vod_ref = 377.0;
    refs.voq_ref = -2.0;
    InnerLoopRates r = inner_loops(s, refs, d);
    CHECK(r.dphi_d == 0.0);
    CHECK(r.dphi_q == 0.0);
  }
  SUBCASE("current tracking freezes the gamma integrators") {
    s.i_od = 4.0;
    s.v_oq = 1.5;
    s.phi_d = 0.02;
    s.i_ld = d.F * s.i_od - d.omega_n * d.C_f * s.v_oq + d.K_iv * s.phi_d;
    InnerLoopRates r = inner_loops(s, refs, d);
    CHECK(r.ild_ref == doctest::Approx(s.i_ld).epsilon(1e-14));
    CHECK(r.dgam_d == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("rhs matches the per-DER operations row by row") {
  MgParams p = test_params();
  StateIndex idx(p);
  Model full(p, DynamicsMode::Full);
  VectorXd x = random_state(idx, 42, /*zero_delta1=*/false);
  VectorXd u(3);
  u << 381.0, 379.5, 380.25;
  VectorXd dx = full.rhs(x, u);
  for (int i = 0; i < 3; ++i) {
    DerView s = DerView::from(x, idx, i);
    PowerRates pw = power_filter_rhs(s, p.ders[i]);
    DroopRefs rf = droop(s, p.ders[i], u[i]);
    InnerLoopRates il = inner_loops(s, rf, p.ders[i]);
    CHECK(dx[idx.der(i, kP)] == doctest::Approx(pw.dP).epsilon(1e-14));
    CHECK(dx[idx.der(i, kQ)] == doctest::Approx(pw.dQ).epsilon(1e-14));
    CHECK(dx[idx.der(i, kPhiD)] == doctest::Approx(il.dphi_d).epsilon(1e-14));
    CHECK(dx[idx.der(i, kPhiQ)] == doctest::Approx(il.dphi_q).epsilon(1e-14));
    CHECK(dx[idx.der(i, kGamD)] == doctest::Approx(il.dgam_d).epsilon(1e-14));
    CHECK(dx[idx.der(i, kGamQ)] == doctest::Approx(il.dgam_q).epsilon(1e-14));
    // LC filter rows, using the references the loops demanded.
    const DerParams& d = p.ders[i];
    double dild = (il.vid_ref - s.v_od - d.r_f * s.i_ld) / d.L_f +
                  rf.omega * s.i_lq;
    CHECK(dx[idx.der(i, kIlD)] ==
          doctest::Approx(dild).epsilon(1e-12));
    double dvod = (s.i_ld - s.i_od) / d.C_f + rf.omega * s.v_oq;
    CHECK(dx[idx.der(i, kVoD)] == doctest::Approx(dvod).epsilon(1e-12));
  }
  // Reference angle rate is identically zero.
  CHECK(dx[idx.der(0, kDelta)] == 0.0);
}

TEST_CASE("delta_1 stays zero and rhs is deterministic") {
  MgParams p = test_params();
  StateIndex idx(p);
  Model full(p, DynamicsMode::Full);
  for (unsigned seed = 0; seed < 5; ++seed) {
    VectorXd x = random_state(idx, seed);
    VectorXd u = u380(3);
    VectorXd a = full.rhs(x, u);
    VectorXd b = full.rhs(x, u);
    CHECK((a - b).norm() == 0.0);
    CHECK(a[idx.der(0, kDelta)] == 0.0);
  }
}

TEST_CASE("full and surrogate agree exactly at delta = 0, P = 0") {
  MgParams p = test_params();
  StateIndex idx(p);
  Model full(p, DynamicsMode::Full);
  Model surr(p, DynamicsMode::Surrogate);
  for (unsigned seed = 10; seed < 14; ++seed) {
    VectorXd x = random_state(idx, seed);
    for (int i = 0; i < 3; ++i) {
      x[idx.der(i, kDelta)] = 0.0;
      x[idx.der(i, kP)] = 0.0;
    }
    VectorXd u = u380(3);
    CHECK((full.rhs(x, u) - surr.rhs(x, u)).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("full and surrogate differ once angles are nonzero") {
  MgParams p = test_params();
  StateIndex idx(p);
  Model full(p, DynamicsMode::Full);
  Model surr(p, DynamicsMode::Surrogate);
  VectorXd x = random_state(idx, 3);
  x[idx.der(1, kDelta)] = 0.05;
  VectorXd u = u380(3);
  CHECK((full.rhs(x, u) - surr.rhs(x, u)).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("rhs at the published initial point") {
  MgParams p = test_params();
  StateIndex idx(p);
  Model full(p, DynamicsMode::Full);
  VectorXd x0 = complete_initial_state(p, testutil::test_initial());
  VectorXd dx = full.rhs(x0, u380(3));
  // Power-filter row reproduces its defining arithmetic.
  const DerParams& d1 = p.ders[0];
  double p1 = x0[idx.der(0, kP)];
  CHECK(dx[idx.der(0, kP)] ==
        doctest::Approx(d1.omega_c * (380.8 * 11.4 + 0.0 * 0.4 - p1)));
  // Completion puts the droop/PI chain at equilibrium: integrator rows rest.
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(dx[idx.der(i, kPhiD)]) < 1e-10);
    CHECK(std::abs(dx[idx.der(i, kPhiQ)]) < 1e-10);
    CHECK(std::abs(dx[idx.der(i, kGamD)]) < 1e-9);
    CHECK(std::abs(dx[idx.der(i, kGamQ)]) < 1e-9);
    // Demanded voltage balances the filter at omega0, so i_l rows rest too.
    CHECK(std::abs(dx[idx.der(i, kIlD)]) < 1e-6);
    CHECK(std::abs(dx[idx.der(i, kIlQ)]) < 1e-6);
    CHECK(dx[idx.der(i, kDelta)] == 0.0);  // equal P, equal droop gains
  }
}

TEST_CASE("bus voltages") {
  SUBCASE("zero currents give zero voltages") {
    Model mdl(test_params(), DynamicsMode::Full);
    MatrixXd v = mdl.bus_voltages(VectorXd::Zero(43));
    CHECK(v.norm() == 0.0);
  }
  SUBCASE("single DER into the virtual resistor only") {
    MgDescription g;
    g.omega_n = testutil::kOmegaN;
    g.r_n = 1000.0;
    g.ders = {testutil::benchmark_der(0)};
    MgParams p = build_params(g);
    StateIndex idx(p);
    Model mdl(p, DynamicsMode::Full);
    VectorXd x = VectorXd::Zero(idx.n());
    x[idx.der(0, kIoD)] = 1.0;
    MatrixXd v = mdl.bus_voltages(x);
    CHECK(v(0, 0) == doctest::Approx(1000.0));
    CHECK(v(0, 1) == 0.0);
  }
  SUBCASE("resistive load divides with the virtual resistor") {
    MgDescription g;
    g.omega_n = testutil::kOmegaN;
    g.r_n = 1000.0;
    g.ders = {testutil::benchmark_der(0)};
    LoadParams ld;
    ld.kind = LoadKind::Resistive;
    ld.R_load = 25.0;
    ld.bus = 0;
    g.loads = {ld};
    MgParams p = build_params(g);
    StateIndex idx(p);
    Model mdl(p, DynamicsMode::Full);
    VectorXd x = VectorXd::Zero(idx.n());
    x[idx.der(0, kIoD)] = 2.0;
    MatrixXd v = mdl.bus_voltages(x);
    CHECK(v(0, 0) == doctest::Approx(1000.0 * 25.0 / 1025.0 * 2.0));
  }
}

TEST_CASE("frame rotation preserves the current magnitude") {
  MgDescription g;
  g.omega_n = testutil::kOmegaN;
  g.r_n = 1000.0;
  g.ders = {testutil::benchmark_der(0)};
  MgParams p = build_params(g);
  StateIndex idx(p);
  Model mdl(p, DynamicsMode::Full);
  VectorXd x = VectorXd::Zero(idx.n());
  x[idx.der(0, kIoD)] = 3.0;
  x[idx.der(0, kIoQ)] = -4.0;
  for (double delta = -3.0; delta <= 3.0; delta += 0.37) {
    x[idx.der(0, kDelta)] = delta;
    MatrixXd v = mdl.bus_voltages(x);
    CHECK(std::hypot(v(0, 0), v(0, 1)) ==
          doctest::Approx(1000.0 * 5.0).epsilon(1e-13));
  }
}

TEST_CASE("directional derivatives are exact for the surrogate field") {
  MgParams p = test_params();
  StateIndex idx(p);
  Model surr(p, DynamicsMode::Surrogate);
  std::mt19937 gen(77);
  std::uniform_real_distribution<double> uu(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    VectorXd x = random_state(idx, 100 + trial);
    VectorXd u = u380(3);
    VectorXd vx(idx.n()), vu(3);
    for (int i = 0; i < idx.n(); ++i) vx[i] = uu(gen);
    for (int i = 0; i < 3; ++i) vu[i] = uu(gen);
    VectorXd jvp = surr.rhs_jvp(x, u, vx, vu);
    // The surrogate field is quadratic, so the full-step central difference
    // is an exact directional derivative.
    VectorXd cd = 0.5 * (surr.rhs(x + vx, u + vu) - surr.rhs(x - vx, u - vu));
    CHECK((jvp - cd).norm() <= 1e-9 * std::max(1.0, cd.norm()));
  }
}

TEST_CASE("directional derivatives match finite differences on the full field") {
  MgParams p = test_params();
  StateIndex idx(p);
  Model full(p, DynamicsMode::Full);
  VectorXd x = random_state(idx, 200);
  VectorXd u = u380(3);
  std::mt19937 gen(201);
  std::uniform_real_distribution<double> uu(-1.0, 1.0);
  VectorXd vx(idx.n()), vu(3);
  for (int i = 0; i < idx.n(); ++i) vx[i] = uu(gen);
  for (int i = 0; i < 3; ++i) vu[i] = uu(gen);
  VectorXd jvp = full.rhs_jvp(x, u, vx, vu);
  const double h = 1e-6;
  VectorXd cd =
      (full.rhs(x + h * vx, u + h * vu) - full.rhs(x - h * vx, u - h * vu)) /
      (2.0 * h);
  CHECK((jvp - cd).norm() <= 1e-5 * std::max(1.0, jvp.norm()));
}

TEST_CASE("jacobian columns reproduce directional derivatives") {
  MgParams p = test_params();
  StateIndex idx(p);
  Model full(p, DynamicsMode::Full);
  VectorXd x = random_state(idx, 300);
  VectorXd u = u380(3);
  MatrixXd j = full.rhs_jacobian(x, u);
  std::mt19937 gen(301);
  std::uniform_real_distribution<double> uu(-1.0, 1.0);
  VectorXd v(idx.n());
  for (int i = 0; i < idx.n(); ++i) v[i] = uu(gen);
  VectorXd jv = j * v;
  VectorXd jvp = full.rhs_jvp(x, u, v, VectorXd::Zero(3));
  CHECK((jv - jvp).norm() <= 1e-12 * std::max(1.0, jvp.norm()));
}

TEST_CASE("RL loads integrate in full mode and freeze in surrogate mode") {
  MgDescription g = testutil::test_system();
  LoadParams rl;
  rl.kind = LoadKind::RL;
  rl.R_load = 30.0;
  rl.L_load = 0.05;
  rl.bus = 1;
  g.loads.push_back(rl);
  MgParams p = build_params(g);
  StateIndex idx(p);
  CHECK(p.p() == 1);
  CHECK(idx.n() == 45);
  // Surrogate folds the RL resistance into the bus shunt; full keeps r_n.
  CHECK(p.rho[1] == doctest::Approx(1000.0));
  CHECK(p.rho_surrogate[1] == doctest::Approx(1000.0 * 30.0 / 1030.0));

  Model full(p, DynamicsMode::Full);
  Model surr(p, DynamicsMode::Surrogate);
  VectorXd x = random_state(idx, 400);
  x[idx.rl(0)] = 2.0;
  x[idx.rl(0) + 1] = -1.0;
  VectorXd u = u380(3);

  VectorXd dxf = full.rhs(x, u);
  MatrixXd vb = full.bus_voltages(x);
  const double w1 = p.omega_n - p.ders[0].D_P * x[idx.der(0, kP)];
  CHECK(dxf[idx.rl(0)] ==
        doctest::Approx((vb(1, 0) - 30.0 * 2.0) / 0.05 + w1 * -1.0));
  CHECK(dxf[idx.rl(0) + 1] ==
        doctest::Approx((vb(1, 1) - 30.0 * -1.0) / 0.05 - w1 * 2.0));

  VectorXd dxs = surr.rhs(x, u);
  CHECK(dxs[idx.rl(0)] == 0.0);
  CHECK(dxs[idx.rl(0) + 1] == 0.0);
}

TEST_CASE("single DER system is well formed") {
  MgDescription g;
  g.omega_n = testutil::kOmegaN;
  g.r_n = 1000.0;
  g.ders = {testutil::benchmark_der(0)};
  MgParams p = build_params(g);
  StateIndex idx(p);
  CHECK(idx.n() == 13);
  Model mdl(p, DynamicsMode::Full);
  VectorXd x = random_state(idx, 500);
  VectorXd dx = mdl.rhs(x, VectorXd::Constant(1, 380.0));
  CHECK(dx[idx.der(0, kDelta)] == 0.0);
  CHECK(dx.allFinite());
}

TEST_CASE("rhs rejects mismatched dimensions") {
  Model mdl(test_params(), DynamicsMode::Full);
  CHECK_THROWS_AS(mdl.rhs(VectorXd::Zero(10), VectorXd::Zero(3)), ConfigError);
  CHECK_THROWS_AS(mdl.rhs(VectorXd::Zero(43), VectorXd::Zero(2)), ConfigError);
}
