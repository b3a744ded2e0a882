/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "mglift/control.hpp"
#include "mglift/errors.hpp"
#include "mglift/lift.hpp"
#include "mglift/model.hpp"
#include "mglift/numerics.hpp"
#include "testutil.hpp"

using namespace mglift;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const MgParams& test_params() {
  static const MgParams p = build_params(testutil::test_system());
  return p;
}

const LiftedModel& test_model() {
  static const LiftedModel lm(test_params());
  return lm;
}

VectorXd vref(double v = 380.0) { return VectorXd::Constant(3, v); }

// Synthesis is the expensive step; share one controller across cases.
const LqiController& test_controller() {
  static const LqiController ctrl = synthesize(test_model(), vref());
  return ctrl;
}

// Published start point driven past the fast filter/network transient so the
// lifted chain components take ordinary magnitudes.
const VectorXd& relaxed_state() {
  static const VectorXd x = [] {
    const MgParams& p = test_params();
    Model surr(p, DynamicsMode::Surrogate);
    VectorXd u = VectorXd::Constant(3, 380.0);
    auto f = [&](double, const VectorXd& xs, VectorXd& dx) {
      surr.rhs(xs, u, dx);
    };
    VectorXd xc = complete_initial_state(p, testutil::test_initial());
    const double h = 3e-7;
    for (int k = 0; k < 100000; ++k) num::rk4_step(f, k * h, h, xc);
    return xc;
  }();
  return x;
}

// Two-DER variant used for dimension-mismatch and generality checks.
MgDescription two_der_system() {
  MgDescription g = testutil::test_system();
  g.ders.pop_back();
  g.lines.pop_back();
  g.loads.pop_back();
  return g;
}

}  // namespace

TEST_CASE("augmentation places the plant blocks exactly") {
  const LiftedModel& lm = test_model();
  AugmentedSystem aug = augment(lm);
  REQUIRE(aug.a_tilde.rows() == 73);
  REQUIRE(aug.a_tilde.cols() == 73);
  REQUIRE(aug.b_tilde.rows() == 73);
  REQUIRE(aug.b_tilde.cols() == 17);
  REQUIRE(aug.c_tilde.rows() == 3);
  REQUIRE(aug.c_tilde.cols() == 73);
  CHECK(aug.n_lift == lm.N);
  CHECK(aug.n_in == lm.M);
  CHECK(aug.m == lm.m);
  CHECK(aug.a_tilde.topLeftCorner(lm.N, lm.N) == lm.A);
  CHECK(aug.a_tilde.bottomLeftCorner(lm.m, lm.N) == -lm.C);
  CHECK(aug.a_tilde.rightCols(lm.m).isZero(0.0));
  CHECK(aug.b_tilde.topRows(lm.N) == lm.B);
  CHECK(aug.b_tilde.bottomRows(lm.m).isZero(0.0));
  CHECK(aug.c_tilde.leftCols(lm.N) == lm.C);
  CHECK(aug.c_tilde.rightCols(lm.m).isZero(0.0));
}

TEST_CASE("weight expansion builds the documented diagonals") {
  AugmentedSystem aug = augment(test_model());
  MatrixXd q, r;
  LqiWeights w;
  w.state = 2.5;
  w.integrator = 4e3;
  w.control = 0.5;
  make_weight_matrices(aug, w, q, r);
  REQUIRE(q.rows() == 73);
  REQUIRE(r.rows() == 17);
  CHECK(q.topLeftCorner(70, 70) == 2.5 * MatrixXd::Identity(70, 70));
  CHECK(q.bottomRightCorner(3, 3) == 4e3 * MatrixXd::Identity(3, 3));
  CHECK(q.topRightCorner(70, 3).isZero(0.0));
  CHECK(r == 0.5 * MatrixXd::Identity(17, 17));

  LqiWeights bad;
  bad.control = 0.0;
  CHECK_THROWS_AS(make_weight_matrices(aug, bad, q, r), ConfigError);
  bad = LqiWeights{};
  bad.integrator = -1.0;
  CHECK_THROWS_AS(make_weight_matrices(aug, bad, q, r), ConfigError);
}

TEST_CASE("steady state solves the regulation equations on the test system") {
  const LiftedModel& lm = test_model();
  SteadyState ss = steady_state(lm, vref());
  REQUIRE(ss.z_inf.size() == lm.N);
  REQUIRE(ss.u_inf.size() == lm.M);
  CHECK((lm.A * ss.z_inf + lm.B * ss.u_inf).lpNorm<Eigen::Infinity>() <=
        1e-9 * 380.0);
  CHECK((lm.C * ss.z_inf - vref()).lpNorm<Eigen::Infinity>() <= 1e-9 * 380.0);
  CHECK(ss.residual <= 1e-9 * 380.0);

  // Chain observables and their inputs vanish at any steady point: each
  // derivative-chain row forces the next stage to zero in turn.
  for (int i = 0; i < lm.m; ++i) {
    CHECK(ss.z_inf.segment(lm.zpq(i) + 2, 4).lpNorm<Eigen::Infinity>() <=
          1e-9);
  }
  CHECK(ss.z_inf.segment(lm.znet1(), 2 * lm.nnet).lpNorm<Eigen::Infinity>() <=
        1e-9);
  CHECK(ss.u_inf.tail(lm.M - lm.m).lpNorm<Eigen::Infinity>() <= 1e-9);

  // The physical setpoint components land near the droop-corrected band.
  for (int i = 0; i < lm.m; ++i) {
    CHECK(ss.u_inf[i] > 300.0);
    CHECK(ss.u_inf[i] < 460.0);
  }
}

TEST_CASE("steady state is linear and vanishes for a zero reference") {
  const LiftedModel& lm = test_model();
  SteadyState zero = steady_state(lm, VectorXd::Zero(3));
  CHECK(zero.z_inf.lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(zero.u_inf.lpNorm<Eigen::Infinity>() <= 1e-12);

  SteadyState base = steady_state(lm, vref());
  SteadyState scaled = steady_state(lm, 0.25 * vref());
  CHECK((scaled.z_inf - 0.25 * base.z_inf).norm() <= 1e-9 * base.z_inf.norm());
  CHECK((scaled.u_inf - 0.25 * base.u_inf).norm() <= 1e-9 * base.u_inf.norm());

  CHECK_THROWS_AS(steady_state(lm, VectorXd::Zero(2)), ConfigError);
}

TEST_CASE("synthesis produces a certified stabilizing gain") {
  const LiftedModel& lm = test_model();
  const LqiController& ctrl = test_controller();
  AugmentedSystem aug = augment(lm);
  MatrixXd q, r;
  make_weight_matrices(aug, ctrl.weights, q, r);

  CHECK(ctrl.care_residual <= 1e-6 * q.norm());
  CHECK((ctrl.p - ctrl.p.transpose()).lpNorm<Eigen::Infinity>() <=
        1e-10 * ctrl.p.lpNorm<Eigen::Infinity>());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(
      0.5 * (ctrl.p + ctrl.p.transpose()));
  CHECK(es.eigenvalues().minCoeff() >= -1e-9 * es.eigenvalues().maxCoeff());

  // gain definition, entrywise against the defining formula
  MatrixXd k_ref = r.ldlt().solve(aug.b_tilde.transpose() * ctrl.p);
  CHECK((ctrl.k - k_ref).lpNorm<Eigen::Infinity>() <=
        1e-12 * k_ref.lpNorm<Eigen::Infinity>());

  CHECK(ctrl.closed_loop_abscissa < 0.0);
  CHECK(ctrl.closed_loop_abscissa ==
        doctest::Approx(num::spectral_abscissa(aug.a_tilde -
                                               aug.b_tilde * ctrl.k))
            .epsilon(1e-10));

  CHECK(ctrl.n_lift == lm.N);
  CHECK(ctrl.n_in == lm.M);
  CHECK(ctrl.m == lm.m);
  CHECK(ctrl.model_fingerprint == model_fingerprint(lm));
  CHECK(ctrl.model_fingerprint != 0);
}

TEST_CASE("model fingerprint tracks the generating matrices") {
  const LiftedModel& lm = test_model();
  LiftedModel rebuilt(test_params());
  CHECK(model_fingerprint(lm) == model_fingerprint(rebuilt));

  MgDescription tweaked = testutil::test_system();
  tweaked.ders[0].r_c = 0.04;
  LiftedModel other(build_params(tweaked));
  CHECK(model_fingerprint(lm) != model_fingerprint(other));
}

TEST_CASE("scalar integrator plant: augmented servo has zero offset") {
  // plant  x' = -x + u,  y = x  ->  hand-checkable 2x2 closed loop
  AugmentedSystem aug;
  aug.n_lift = 1;
  aug.n_in = 1;
  aug.m = 1;
  aug.a_tilde.resize(2, 2);
  aug.a_tilde << -1.0, 0.0, -1.0, 0.0;
  aug.b_tilde.resize(2, 1);
  aug.b_tilde << 1.0, 0.0;
  aug.c_tilde.resize(1, 2);
  aug.c_tilde << 1.0, 0.0;

  const double r_step = 2.0;
  SteadyState ss;
  ss.z_inf = VectorXd::Constant(1, r_step);
  ss.u_inf = VectorXd::Constant(1, r_step);
  VectorXd y_ref = VectorXd::Constant(1, r_step);

  LqiController ctrl = synthesize(aug, MatrixXd::Identity(2, 2),
                                  MatrixXd::Identity(1, 1), ss, y_ref);

  // Riccati closed form: P = [[1,-1],[-1,2]], K = [1,-1], poles at -1, -1.
  MatrixXd p_ref(2, 2);
  p_ref << 1.0, -1.0, -1.0, 2.0;
  CHECK((ctrl.p - p_ref).lpNorm<Eigen::Infinity>() <= 1e-9);
  CHECK(ctrl.k(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ctrl.k(0, 1) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(ctrl.closed_loop_abscissa == doctest::Approx(-1.0).epsilon(1e-6));

  // step response from rest: deviation coordinates start at [-r; 0]
  MatrixXd acl = aug.a_tilde - aug.b_tilde * ctrl.k;
  Eigen::Vector2d zt0(-r_step, 0.0);
  Eigen::Vector2d zt = (acl * 30.0).exp() * zt0;
  CHECK(std::abs((aug.c_tilde * zt)[0]) <= 1e-9);  // y(30) == y_ref
}

TEST_CASE("closed loop drives the lifted plant output to the reference") {
  const LiftedModel& lm = test_model();
  const LqiController& ctrl = test_controller();
  const MgParams& p = test_params();
  AugmentedSystem aug = augment(lm);
  MatrixXd acl = aug.a_tilde - aug.b_tilde * ctrl.k;

  VectorXd x0 = complete_initial_state(p, testutil::test_initial());
  VectorXd z0 = lm.lift(x0, vref());
  VectorXd zt0(lm.N + lm.m);
  zt0.head(lm.N) = z0 - ctrl.z_inf;
  zt0.tail(lm.m).setZero();

  // z~' = (A~ - B~K) z~ exactly on the lifted plant, so the output error is
  // C~ exp(Acl T) z~(0); the slowest certified mode fixes the horizon.
  const double t_settle = 50.0 / -ctrl.closed_loop_abscissa;
  VectorXd zt = (acl * t_settle).exp() * zt0;
  CHECK((aug.c_tilde * zt).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("control step applies the documented law and recovery") {
  const LiftedModel& lm = test_model();
  const LqiController& ctrl = test_controller();
  const VectorXd& x = relaxed_state();
  VectorXd z_i(3);
  z_i << 0.2, -0.1, 0.05;
  VectorXd u_prev = vref();

  ControlStep cs = control_step(ctrl, lm, x, z_i, u_prev);
  REQUIRE(cs.u.size() == 3);
  CHECK(cs.u.allFinite());

  // re-derive the law
  VectorXd z = lm.lift(x, u_prev);
  VectorXd zt(lm.N + lm.m);
  zt.head(lm.N) = z - ctrl.z_inf;
  zt.tail(lm.m) = z_i;
  VectorXd u_lift_ref = ctrl.u_inf - ctrl.k * zt;
  CHECK((cs.u_lifted - u_lift_ref).lpNorm<Eigen::Infinity>() <=
        1e-12 * u_lift_ref.lpNorm<Eigen::Infinity>());

  VectorXd u_ref = ctrl.u_eq + ctrl.k_i_phys * z_i;
  CHECK((cs.u - u_ref).lpNorm<Eigen::Infinity>() <=
        1e-12 * u_ref.lpNorm<Eigen::Infinity>());

  SUBCASE("zero integrator state returns the equilibrium input") {
    ControlStep rest = control_step(ctrl, lm, x, VectorXd::Zero(3), u_prev);
    CHECK((rest.u - ctrl.u_eq).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("synthesized equilibrium holds the reference exactly") {
  const LqiController& ctrl = test_controller();
  const MgParams& p = test_params();
  Model plant(p, DynamicsMode::Full);
  StateIndex ix(p);

  REQUIRE(ctrl.has_recovery());
  REQUIRE(ctrl.x_eq.size() == plant.n());
  for (int i = 0; i < 3; ++i) {
    CHECK(ctrl.x_eq[ix.der(i, kVoD)] == doctest::Approx(380.0).epsilon(1e-12));
  }
  CHECK(ctrl.x_eq[ix.der(0, kDelta)] == 0.0);

  // the pair (x_eq, u_eq) is a rest point of the plant
  VectorXd fx = plant.rhs(ctrl.x_eq, ctrl.u_eq);
  CHECK(fx.lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK(ctrl.equilibrium_residual <= 1e-6);

  // integral gain decouples the dc loop:  K_I G = g I
  MatrixXd loop = ctrl.k_i_phys * ctrl.dc_gain;
  MatrixXd expect = ctrl.recovery_gain * MatrixXd::Identity(3, 3);
  CHECK((loop - expect).lpNorm<Eigen::Infinity>() <=
        1e-9 * ctrl.recovery_gain);
}

TEST_CASE("dc gain matches finite-difference equilibrium shifts") {
  const LqiController& ctrl = test_controller();
  const MgParams& p = test_params();
  Model plant(p, DynamicsMode::Full);
  StateIndex ix(p);
  const int gauge = ix.der(0, kDelta);

  // re-solve the equilibrium x(u) at stepped inputs with u held fixed and no
  // output constraint; the voltage shift per input step is a gain column.
  auto solve_x = [&](const VectorXd& u) {
    VectorXd xs = ctrl.x_eq;
    for (int it = 0; it < 30; ++it) {
      VectorXd r = plant.rhs(xs, u);
      r[gauge] = xs[gauge];
      if (r.lpNorm<Eigen::Infinity>() < 1e-8) break;
      MatrixXd jac = plant.rhs_jacobian(xs, u);
      jac.row(gauge).setZero();
      jac(gauge, gauge) = 1.0;
      xs += jac.partialPivLu().solve(-r);
    }
    return xs;
  };
  const double eps = 1e-3;
  for (int j = 0; j < 3; ++j) {
    VectorXd up = ctrl.u_eq, um = ctrl.u_eq;
    up[j] += eps;
    um[j] -= eps;
    VectorXd xp = solve_x(up), xm = solve_x(um);
    for (int i = 0; i < 3; ++i) {
      const double fd =
          (xp[ix.der(i, kVoD)] - xm[ix.der(i, kVoD)]) / (2.0 * eps);
      CHECK(fd == doctest::Approx(ctrl.dc_gain(i, j)).epsilon(5e-6));
    }
  }
}

TEST_CASE("recovered loop is locally stable at the equilibrium") {
  const LqiController& ctrl = test_controller();
  const MgParams& p = test_params();
  Model plant(p, DynamicsMode::Full);
  StateIndex ix(p);
  const int n = plant.n();

  // closed loop  x' = f(x, u_eq + K_I z_I),  z_I' = y_ref - v_od(x)
  MatrixXd jac = MatrixXd::Zero(n + 3, n + 3);
  jac.topLeftCorner(n, n) = plant.rhs_jacobian(ctrl.x_eq, ctrl.u_eq);
  MatrixXd bu(n, 3);
  for (int j = 0; j < 3; ++j) {
    VectorXd vu = VectorXd::Zero(3);
    vu[j] = 1.0;
    bu.col(j) = plant.rhs_jvp(ctrl.x_eq, ctrl.u_eq, VectorXd::Zero(n), vu);
  }
  jac.block(0, n, n, 3) = bu * ctrl.k_i_phys;
  for (int i = 0; i < 3; ++i) jac(n + i, ix.der(i, kVoD)) = -1.0;

  // exactly one neutral mode: the reference angle, frozen by the frame
  const Eigen::VectorXcd ev = num::eigenvalues(jac);
  int neutral = 0;
  double worst = -1e300;
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i]) < 1e-4) {
      ++neutral;
      continue;
    }
    worst = std::max(worst, ev[i].real());
  }
  CHECK(neutral == 1);
  CHECK(worst < -1.0);
}

TEST_CASE("recovery reproduces the input that generated a consistent target") {
  const LiftedModel& lm = test_model();
  const VectorXd& x = relaxed_state();
  VectorXd u(3);
  u << 383.0, 377.5, 380.25;

  // A lifted input assembled from real (x, u) satisfies B U = F + script_b u
  // exactly, so the minimizer must return u itself with a zero residual.
  VectorXd u_big = lm.lifted_input(x, u);
  VectorXd f_part;
  MatrixXd script_b;
  lm.decompose(x, f_part, script_b);
  VectorXd target = lm.B * u_big - f_part;
  VectorXd u_rec = num::least_squares(script_b, target);
  CHECK((u_rec - u).lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK((script_b * u_rec - target).norm() <= 1e-9 * target.norm());
}

TEST_CASE("synthesis generalizes to a two-inverter network") {
  MgParams p2 = build_params(two_der_system());
  LiftedModel lm2(p2);
  VectorXd y2 = VectorXd::Constant(2, 380.0);
  LqiController c2 = synthesize(lm2, y2);
  CHECK(c2.closed_loop_abscissa < 0.0);
  CHECK(c2.m == 2);
  SUBCASE("controllers refuse a foreign model") {
    CHECK_THROWS_AS(control_step(c2, test_model(), relaxed_state(),
                                 VectorXd::Zero(3), vref()),
                    ConfigError);
    CHECK_THROWS_AS(control_step(test_controller(), test_model(),
                                 relaxed_state(), VectorXd::Zero(2), vref()),
                    ConfigError);
  }
}

TEST_CASE("controller files round-trip exactly") {
  const LqiController& ctrl = test_controller();
  const std::string path = "controller_roundtrip_test.json";
  save_controller(ctrl, path);
  LqiController back = load_controller(path);
  std::remove(path.c_str());

  CHECK(back.n_lift == ctrl.n_lift);
  CHECK(back.n_in == ctrl.n_in);
  CHECK(back.m == ctrl.m);
  CHECK(back.model_fingerprint == ctrl.model_fingerprint);
  CHECK(back.weights.state == ctrl.weights.state);
  CHECK(back.weights.integrator == ctrl.weights.integrator);
  CHECK(back.weights.control == ctrl.weights.control);
  CHECK(back.care_residual == ctrl.care_residual);
  CHECK(back.closed_loop_abscissa == ctrl.closed_loop_abscissa);
  CHECK(back.y_ref == ctrl.y_ref);
  CHECK(back.z_inf == ctrl.z_inf);
  CHECK(back.u_inf == ctrl.u_inf);
  CHECK(back.k == ctrl.k);
  CHECK(back.p == ctrl.p);
  REQUIRE(back.has_recovery());
  CHECK(back.recovery_gain == ctrl.recovery_gain);
  CHECK(back.equilibrium_residual == ctrl.equilibrium_residual);
  CHECK(back.x_eq == ctrl.x_eq);
  CHECK(back.u_eq == ctrl.u_eq);
  CHECK(back.dc_gain == ctrl.dc_gain);
  CHECK(back.k_i_phys == ctrl.k_i_phys);
}

TEST_CASE("controller loading rejects bad files") {
  CHECK_THROWS_AS(load_controller("does_not_exist_controller.json"), IoError);

  const std::string path = "controller_malformed_test.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_controller(path), ConfigError);
  {
    std::ofstream out(path);
    out << "{\"kind\": \"something-else\"}";
  }
  CHECK_THROWS_AS(load_controller(path), ConfigError);
  {
    std::ofstream out(path);
    out << "{\"kind\": \"mglift-lqi-controller\"}";
  }
  CHECK_THROWS_AS(load_controller(path), ConfigError);
  std::remove(path.c_str());
}
