/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/control.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include <json.hpp>

#include "mglift/errors.hpp"
#include "mglift/numerics.hpp"

namespace mglift {

AugmentedSystem augment(const LiftedModel& model) {
  AugmentedSystem aug;
  aug.n_lift = model.N;
  aug.n_in = model.M;
  aug.m = model.m;
  const int na = model.N + model.m;
  aug.a_tilde = Eigen::MatrixXd::Zero(na, na);
  aug.a_tilde.topLeftCorner(model.N, model.N) = model.A;
  aug.a_tilde.bottomLeftCorner(model.m, model.N) = -model.C;
  aug.b_tilde = Eigen::MatrixXd::Zero(na, model.M);
  aug.b_tilde.topRows(model.N) = model.B;
  aug.c_tilde = Eigen::MatrixXd::Zero(model.m, na);
  aug.c_tilde.leftCols(model.N) = model.C;
  return aug;
}

void make_weight_matrices(const AugmentedSystem& aug, const LqiWeights& w,
                          Eigen::MatrixXd& q, Eigen::MatrixXd& r) {
  if (!(w.state > 0.0) || !(w.integrator > 0.0) || !(w.control > 0.0)) {
    throw ConfigError("lqi weights must be positive");
  }
  const int na = aug.n_lift + aug.m;
  q = w.state * Eigen::MatrixXd::Identity(na, na);
  q.bottomRightCorner(aug.m, aug.m) =
      w.integrator * Eigen::MatrixXd::Identity(aug.m, aug.m);
  r = w.control * Eigen::MatrixXd::Identity(aug.n_in, aug.n_in);
}

SteadyState steady_state(const LiftedModel& model,
                         const Eigen::VectorXd& y_ref) {
  if (y_ref.size() != model.m) {
    throw ConfigError("steady_state: y_ref dimension mismatch");
  }
  const int nr = model.N + model.m;
  const int nc = model.N + model.M;
  Eigen::MatrixXd mat(nr, nc);
  mat.topLeftCorner(model.N, model.N) = model.A;
  mat.topRightCorner(model.N, model.M) = model.B;
  mat.bottomLeftCorner(model.m, model.N) = model.C;
  mat.bottomRightCorner(model.m, model.M).setZero();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nr);
  rhs.tail(model.m) = y_ref;

  // Row equilibration tames the wide dynamic range of the network rows; for
  // a consistent system it leaves the solution set (and hence the
  // minimum-norm member) unchanged.
  Eigen::VectorXd d(nr);
  for (int i = 0; i < nr; ++i) {
    d[i] = std::max(mat.row(i).cwiseAbs().maxCoeff(), 1e-300);
  }
  const Eigen::MatrixXd ms = d.cwiseInverse().asDiagonal() * mat;
  Eigen::VectorXd w = num::least_squares(ms, rhs.cwiseQuotient(d));
  // one refinement pass against the unscaled residual
  const Eigen::VectorXd resid = rhs - mat * w;
  w += num::least_squares(ms, resid.cwiseQuotient(d));

  SteadyState out;
  out.z_inf = w.head(model.N);
  out.u_inf = w.tail(model.M);
  out.residual = (mat * w - rhs).lpNorm<Eigen::Infinity>();
  const double scale = std::max(1.0, y_ref.lpNorm<Eigen::Infinity>());
  if (!(out.residual <= 1e-9 * scale)) {
    char msg[128];
    std::snprintf(msg, sizeof(msg),
                  "steady_state: no lifted steady state reaches the "
                  "reference (residual %.3e, allowed %.3e)",
                  out.residual, 1e-9 * scale);
    throw NumericError(msg);
  }
  return out;
}

PlantEquilibrium plant_equilibrium(const Model& model,
                                   const Eigen::VectorXd& x_seed,
                                   const Eigen::VectorXd& u_seed,
                                   const Eigen::VectorXd& y_ref) {
  const StateIndex& ix = model.idx();
  const int n = model.n();
  const int m = model.m();
  if (x_seed.size() != n || u_seed.size() != m || y_ref.size() != m) {
    throw ConfigError("plant_equilibrium: dimension mismatch");
  }
  const int gauge = ix.der(0, kDelta);
  Eigen::VectorXd xs = x_seed, us = u_seed;
  Eigen::VectorXd best_x = xs, best_u = us;
  double best_r = std::numeric_limits<double>::infinity();
  Eigen::VectorXd fx(n), r(n + m);
  Eigen::VectorXd vu = Eigen::VectorXd::Zero(m);
  for (int it = 0; it < 60; ++it) {
    model.rhs(xs, us, fx);
    r.head(n) = fx;
    for (int i = 0; i < m; ++i) r[n + i] = xs[ix.der(i, kVoD)] - y_ref[i];
    r[gauge] = xs[gauge];  // the rhs row there is identically zero
    const double rn = r.cwiseAbs().maxCoeff();
    if (!std::isfinite(rn)) break;
    if (rn < best_r) {
      best_r = rn;
      best_x = xs;
      best_u = us;
    }
    if (rn < 1e-8) break;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n + m, n + m);
    jac.topLeftCorner(n, n) = model.rhs_jacobian(xs, us);
    for (int j = 0; j < m; ++j) {
      vu.setZero();
      vu[j] = 1.0;
      jac.block(0, n + j, n, 1) =
          model.rhs_jvp(xs, us, Eigen::VectorXd::Zero(n), vu);
    }
    for (int i = 0; i < m; ++i) jac(n + i, ix.der(i, kVoD)) = 1.0;
    jac.row(gauge).setZero();
    jac(gauge, gauge) = 1.0;
    const Eigen::VectorXd dw = jac.partialPivLu().solve(-r);
    xs += dw.head(n);
    us += dw.tail(m);
    if (!xs.allFinite() || !us.allFinite()) break;
  }
  if (!(best_r < 1e-6)) {
    char msg[96];
    std::snprintf(msg, sizeof(msg),
                  "plant_equilibrium: newton stalled (defect %.3e)", best_r);
    throw NumericError(msg);
  }
  PlantEquilibrium eq;
  eq.x = best_x;
  eq.x[gauge] = 0.0;  // pinned; newton leaves rounding dust here
  eq.u = best_u;
  eq.residual = best_r;

  // dc gain with the gauge row pinned:  G = -C_sel (A_d \ B_u).
  Eigen::MatrixXd ad = model.rhs_jacobian(eq.x, eq.u);
  ad.row(gauge).setZero();
  ad(gauge, gauge) = -1.0;
  Eigen::MatrixXd bu(n, m);
  for (int j = 0; j < m; ++j) {
    vu.setZero();
    vu[j] = 1.0;
    bu.col(j) = model.rhs_jvp(eq.x, eq.u, Eigen::VectorXd::Zero(n), vu);
  }
  const Eigen::MatrixXd xg = ad.partialPivLu().solve(bu);
  eq.dc_gain.resize(m, m);
  for (int i = 0; i < m; ++i) eq.dc_gain.row(i) = -xg.row(ix.der(i, kVoD));
  if (!eq.dc_gain.allFinite()) {
    throw NumericError("plant_equilibrium: non-finite dc gain");
  }
  return eq;
}

std::uint64_t model_fingerprint(const LiftedModel& model) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64 offset basis
  auto mix_bytes = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  auto mix_int = [&](std::int64_t v) { mix_bytes(&v, sizeof v); };
  auto mix_mat = [&](const Eigen::MatrixXd& mm) {
    mix_int(mm.rows());
    mix_int(mm.cols());
    for (int j = 0; j < mm.cols(); ++j) {
      for (int i = 0; i < mm.rows(); ++i) {
        const double v = mm(i, j);
        mix_bytes(&v, sizeof v);
      }
    }
  };
  mix_int(model.N);
  mix_int(model.M);
  mix_int(model.m);
  mix_mat(model.A);
  mix_mat(model.B);
  mix_mat(model.C);
  return h;
}

LqiController synthesize(const AugmentedSystem& aug, const Eigen::MatrixXd& q_w,
                         const Eigen::MatrixXd& r_w, const SteadyState& target,
                         const Eigen::VectorXd& y_ref) {
  const num::CareResult care =
      num::solve_care(aug.a_tilde, aug.b_tilde, q_w, r_w);

  LqiController ctrl;
  ctrl.p = care.P;
  ctrl.care_residual = care.residual;
  ctrl.k = r_w.ldlt().solve(aug.b_tilde.transpose() * care.P);
  ctrl.z_inf = target.z_inf;
  ctrl.u_inf = target.u_inf;
  ctrl.y_ref = y_ref;
  ctrl.n_lift = aug.n_lift;
  ctrl.n_in = aug.n_in;
  ctrl.m = aug.m;
  ctrl.closed_loop_abscissa =
      num::spectral_abscissa(aug.a_tilde - aug.b_tilde * ctrl.k);
  if (!(ctrl.closed_loop_abscissa < 0.0)) {
    char msg[128];
    std::snprintf(msg, sizeof(msg),
                  "lqi synthesis left the closed loop unstable "
                  "(spectral abscissa %.3e)",
                  ctrl.closed_loop_abscissa);
    throw NumericError(msg);
  }
  return ctrl;
}

namespace {
// Integral crossover of the recovered physical loop, rad/s.  Well below the
// power-filter corner (omega_c ~ 31 rad/s) for phase margin, high enough to
// settle the voltage error under 1e-3 V within ~2 s of engagement.
constexpr double kRecoveryGain = 5.0;
}  // namespace

LqiController synthesize(const LiftedModel& model, const Eigen::VectorXd& y_ref,
                         const LqiWeights& weights) {
  const AugmentedSystem aug = augment(model);
  Eigen::MatrixXd q, r;
  make_weight_matrices(aug, weights, q, r);
  LqiController ctrl =
      synthesize(aug, q, r, steady_state(model, y_ref), y_ref);
  ctrl.weights = weights;
  ctrl.model_fingerprint = model_fingerprint(model);

  // Physical recovery data: nonlinear equilibrium of the full-order plant,
  // seeded from the mirror observables of z_inf, and the decoupled integral
  // gain  K_I = g G^-1  built on the plant dc gain there.
  const Model plant(model.params(), DynamicsMode::Full);
  const PlantEquilibrium eq =
      plant_equilibrium(plant, model.extract_state(ctrl.z_inf), y_ref, y_ref);
  ctrl.x_eq = eq.x;
  ctrl.u_eq = eq.u;
  ctrl.dc_gain = eq.dc_gain;
  ctrl.equilibrium_residual = eq.residual;
  ctrl.recovery_gain = kRecoveryGain;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(eq.dc_gain);
  if (!lu.isInvertible()) {
    throw NumericError("lqi synthesis: plant dc gain is singular");
  }
  ctrl.k_i_phys = kRecoveryGain * lu.inverse();
  return ctrl;
}

ControlStep control_step(const LqiController& ctrl, const LiftedModel& model,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& z_i,
                         const Eigen::VectorXd& u_prev) {
  if (ctrl.n_lift != model.N || ctrl.n_in != model.M || ctrl.m != model.m) {
    throw ConfigError("control_step: controller/model dimension mismatch");
  }
  if (z_i.size() != model.m) {
    throw ConfigError("control_step: integrator state dimension mismatch");
  }
  if (!ctrl.has_recovery()) {
    throw ConfigError(
        "control_step: controller carries no physical recovery data");
  }
  const Eigen::VectorXd z = model.lift(x, u_prev);
  Eigen::VectorXd z_tilde(model.N + model.m);
  z_tilde.head(model.N) = z - ctrl.z_inf;
  z_tilde.tail(model.m) = z_i;

  ControlStep out;
  out.u_lifted = ctrl.u_inf - ctrl.k * z_tilde;
  out.u = ctrl.u_eq + ctrl.k_i_phys * z_i;
  if (!out.u.allFinite() || !out.u_lifted.allFinite()) {
    throw NumericError("control_step: non-finite control output");
  }
  return out;
}

namespace {

nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
  const int nr = static_cast<int>(j.size());
  const int nc = nr > 0 ? static_cast<int>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(nr, nc);
  for (int i = 0; i < nr; ++i) {
    for (int jj = 0; jj < nc; ++jj) m(i, jj) = j.at(i).at(jj).get<double>();
  }
  return m;
}

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace

void save_controller(const LqiController& ctrl, const std::string& path) {
  nlohmann::json j;
  j["kind"] = "mglift-lqi-controller";
  j["format_version"] = 1;
  j["n_lift"] = ctrl.n_lift;
  j["n_in"] = ctrl.n_in;
  j["m"] = ctrl.m;
  char fp[19];
  std::snprintf(fp, sizeof(fp), "0x%016llx",
                static_cast<unsigned long long>(ctrl.model_fingerprint));
  j["model_fingerprint"] = fp;
  j["weights"] = {{"state", ctrl.weights.state},
                  {"integrator", ctrl.weights.integrator},
                  {"control", ctrl.weights.control}};
  j["care_residual"] = ctrl.care_residual;
  j["closed_loop_abscissa"] = ctrl.closed_loop_abscissa;
  j["y_ref"] = vec_to_json(ctrl.y_ref);
  j["z_inf"] = vec_to_json(ctrl.z_inf);
  j["u_inf"] = vec_to_json(ctrl.u_inf);
  j["k"] = mat_to_json(ctrl.k);
  j["p"] = mat_to_json(ctrl.p);
  if (ctrl.has_recovery()) {
    j["recovery"] = {{"gain", ctrl.recovery_gain},
                     {"equilibrium_residual", ctrl.equilibrium_residual},
                     {"x_eq", vec_to_json(ctrl.x_eq)},
                     {"u_eq", vec_to_json(ctrl.u_eq)},
                     {"dc_gain", mat_to_json(ctrl.dc_gain)},
                     {"k_i_phys", mat_to_json(ctrl.k_i_phys)}};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write controller file: " + path);
  out << j.dump(1) << "\n";
  if (!out.good()) throw IoError("short write on controller file: " + path);
}

LqiController load_controller(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read controller file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("controller file " + path + ": " + e.what());
  }
  try {
    if (j.at("kind").get<std::string>() != "mglift-lqi-controller") {
      throw ConfigError("controller file " + path + ": unrecognized kind");
    }
    LqiController ctrl;
    ctrl.n_lift = j.at("n_lift").get<int>();
    ctrl.n_in = j.at("n_in").get<int>();
    ctrl.m = j.at("m").get<int>();
    ctrl.model_fingerprint = std::strtoull(
        j.at("model_fingerprint").get<std::string>().c_str(), nullptr, 16);
    ctrl.weights.state = j.at("weights").at("state").get<double>();
    ctrl.weights.integrator = j.at("weights").at("integrator").get<double>();
    ctrl.weights.control = j.at("weights").at("control").get<double>();
    ctrl.care_residual = j.at("care_residual").get<double>();
    ctrl.closed_loop_abscissa = j.at("closed_loop_abscissa").get<double>();
    ctrl.y_ref = vec_from_json(j.at("y_ref"));
    ctrl.z_inf = vec_from_json(j.at("z_inf"));
    ctrl.u_inf = vec_from_json(j.at("u_inf"));
    ctrl.k = mat_from_json(j.at("k"));
    ctrl.p = mat_from_json(j.at("p"));
    if (ctrl.k.rows() != ctrl.n_in || ctrl.k.cols() != ctrl.n_lift + ctrl.m ||
        ctrl.z_inf.size() != ctrl.n_lift || ctrl.u_inf.size() != ctrl.n_in ||
        ctrl.y_ref.size() != ctrl.m) {
      throw ConfigError("controller file " + path +
                        ": inconsistent dimensions");
    }
    if (j.contains("recovery")) {
      const nlohmann::json& rec = j.at("recovery");
      ctrl.recovery_gain = rec.at("gain").get<double>();
      ctrl.equilibrium_residual = rec.at("equilibrium_residual").get<double>();
      ctrl.x_eq = vec_from_json(rec.at("x_eq"));
      ctrl.u_eq = vec_from_json(rec.at("u_eq"));
      ctrl.dc_gain = mat_from_json(rec.at("dc_gain"));
      ctrl.k_i_phys = mat_from_json(rec.at("k_i_phys"));
      if (ctrl.u_eq.size() != ctrl.m || ctrl.dc_gain.rows() != ctrl.m ||
          ctrl.dc_gain.cols() != ctrl.m || ctrl.k_i_phys.rows() != ctrl.m ||
          ctrl.k_i_phys.cols() != ctrl.m) {
        throw ConfigError("controller file " + path +
                          ": inconsistent recovery dimensions");
      }
    }
    return ctrl;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("controller file " + path + ": " + e.what());
  }
}

}  // namespace mglift
