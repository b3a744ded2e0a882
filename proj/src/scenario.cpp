/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <random>
#include <stdexcept>

#include "mglift/errors.hpp"

namespace mglift {

namespace {

constexpr double kTimeTol = 1e-9;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, size_t nb) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < nb; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  void d(double v) { bytes(&v, sizeof v); }
  void i(std::int64_t v) { bytes(&v, sizeof v); }
  void vec(const Eigen::VectorXd& v) {
    i(v.size());
    for (int k = 0; k < v.size(); ++k) d(v[k]);
  }
};

// Event bits on the integration time grid.
enum : int { kEvRecord = 1, kEvEngage = 2, kEvRefresh = 4 };

std::vector<std::pair<double, int>> build_events(const Scenario& sc,
                                                 bool closed_loop,
                                                 double warmup_end) {
  std::vector<std::pair<double, int>> raw;
  const double stride = sc.record_stride;
  const int n_rec = static_cast<int>(std::floor(sc.t_end / stride + kTimeTol));
  for (int k = 0; k <= n_rec; ++k) raw.emplace_back(k * stride, kEvRecord);
  if (n_rec * stride < sc.t_end - kTimeTol) {
    raw.emplace_back(sc.t_end, kEvRecord);
  }
  if (closed_loop) raw.emplace_back(sc.t_engage, kEvEngage | kEvRefresh);
  if (sc.integ.method == num::Method::ETD2) {
    raw.emplace_back(warmup_end, kEvRefresh);
    if (sc.integ.l_refresh > 0.0) {
      for (double tr = warmup_end + sc.integ.l_refresh;
           tr < sc.t_end - kTimeTol; tr += sc.integ.l_refresh) {
        raw.emplace_back(tr, kEvRefresh);
      }
    }
  }
  raw.emplace_back(sc.t_end, 0);
  std::sort(raw.begin(), raw.end());
  std::vector<std::pair<double, int>> events;
  for (const auto& e : raw) {
    if (!events.empty() && e.first - events.back().first < kTimeTol) {
      events.back().second |= e.second;
    } else {
      events.push_back(e);
    }
  }
  return events;
}

// Frozen-L exponential steppers for the macro step and any event remainders,
// rebuilt together whenever the linearization is refreshed.
struct StepperCache {
  Eigen::MatrixXd L;
  std::map<long long, num::Etd2Stepper> by_h;

  void refresh(Eigen::MatrixXd l) {
    L = std::move(l);
    by_h.clear();
  }
  const num::Etd2Stepper& get(double h) {
    const long long key = std::llround(h * 1e12);
    auto it = by_h.find(key);
    if (it == by_h.end()) it = by_h.try_emplace(key, L, h).first;
    return it->second;
  }
};

}  // namespace

std::uint64_t scenario_fingerprint(const Scenario& sc) {
  Fnv f;
  f.d(sc.params.omega_n);
  f.d(sc.params.r_n);
  f.i(sc.params.m());
  f.i(sc.params.q());
  f.i(sc.params.p());
  for (const DerParams& d : sc.params.ders) {
    f.d(d.omega_n);
    f.d(d.omega_c);
    f.d(d.D_P);
    f.d(d.D_Q);
    f.d(d.K_pv);
    f.d(d.K_iv);
    f.d(d.K_pc);
    f.d(d.K_ic);
    f.d(d.F);
    f.d(d.L_f);
    f.d(d.r_f);
    f.d(d.C_f);
    f.d(d.L_c);
    f.d(d.r_c);
    f.d(d.v_set);
    f.i(d.bus);
  }
  for (const LineParams& l : sc.params.lines) {
    f.d(l.r_line);
    f.d(l.L_line);
    f.i(l.from_bus);
    f.i(l.to_bus);
  }
  for (const LoadParams& l : sc.params.loads) {
    f.i(static_cast<int>(l.kind));
    f.d(l.R_load);
    f.d(l.L_load);
    f.i(l.bus);
  }
  f.i(static_cast<int>(sc.route));
  f.vec(sc.x0);
  f.vec(sc.u_const);
  f.i(sc.lqi.has_value());
  if (sc.lqi) {
    f.i(static_cast<std::int64_t>(sc.lqi->model_fingerprint));
    f.d(sc.lqi->weights.state);
    f.d(sc.lqi->weights.integrator);
    f.d(sc.lqi->weights.control);
    f.d(sc.lqi->recovery_gain);
    f.vec(sc.lqi->y_ref);
    f.d(sc.t_engage);
  }
  f.d(sc.t_end);
  f.d(sc.record_stride);
  f.d(sc.perturb_fraction);
  f.i(static_cast<int>(sc.integ.method));
  f.d(sc.integ.step);
  f.d(sc.integ.rel_tol);
  f.d(sc.integ.abs_tol);
  f.d(sc.integ.l_refresh);
  f.d(sc.integ.warmup_time);
  f.d(sc.integ.warmup_step);
  f.bytes(sc.label.data(), sc.label.size());
  return f.h;
}

std::uint64_t batch_stream(std::uint64_t seed, int run) {
  return seed ^
         (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(run + 1));
}

Eigen::VectorXd perturb_initial_state(const Eigen::VectorXd& x0,
                                      double fraction, std::uint64_t stream,
                                      const StateIndex& ix) {
  if (x0.size() != ix.n()) {
    throw ConfigError("perturb_initial_state: state dimension mismatch");
  }
  if (!(fraction >= 0.0)) {
    throw ConfigError("perturb_initial_state: fraction must be >= 0");
  }
  // state class per flat position: DER symbol, line D/Q, RL D/Q
  const int n = ix.n();
  std::vector<int> cls(n, 0);
  for (int i = 0; i < ix.m(); ++i) {
    for (int s = 0; s < kDerStates; ++s) cls[ix.der(i) + s] = s;
  }
  for (int e = 0; e < ix.q(); ++e) {
    cls[ix.line(e)] = kDerStates;
    cls[ix.line(e) + 1] = kDerStates + 1;
  }
  for (int l = 0; l < ix.p(); ++l) {
    cls[ix.rl(l)] = kDerStates + 2;
    cls[ix.rl(l) + 1] = kDerStates + 3;
  }
  std::vector<double> mean(kDerStates + 4, 0.0);
  std::vector<int> count(kDerStates + 4, 0);
  for (int j = 0; j < n; ++j) {
    mean[cls[j]] += std::abs(x0[j]);
    ++count[cls[j]];
  }
  for (size_t c = 0; c < mean.size(); ++c) {
    if (count[c] > 0) mean[c] /= count[c];
  }

  std::mt19937_64 gen(splitmix64(stream));
  Eigen::VectorXd out(n);
  for (int j = 0; j < n; ++j) {
    const double unit = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    const double eps = fraction * (2.0 * unit - 1.0);
    out[j] = x0[j] != 0.0 ? x0[j] * (1.0 + eps) : eps * mean[cls[j]];
  }
  out[ix.der(0, kDelta)] = 0.0;  // frame gauge, not an observable
  return out;
}

namespace {

struct RunGuts {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x, z, u, ul, y;
  bool diverged = false;
  double t_diverged = 0.0;
};

Trajectory assemble(const Scenario& sc, const RunGuts& g, int n, int nz,
                    int nul) {
  Trajectory tr;
  const int s = static_cast<int>(g.t.size());
  tr.t.resize(s);
  tr.x.resize(n, s);
  tr.u.resize(sc.u_const.size(), s);
  tr.y.resize(sc.u_const.size(), s);
  if (nz > 0) tr.z.resize(nz, s);
  if (nul > 0) tr.u_lifted.resize(nul, s);
  for (int k = 0; k < s; ++k) {
    tr.t[k] = g.t[k];
    tr.x.col(k) = g.x[k];
    tr.u.col(k) = g.u[k];
    tr.y.col(k) = g.y[k];
    if (nz > 0) tr.z.col(k) = g.z[k];
    if (nul > 0) tr.u_lifted.col(k) = g.ul[k];
  }
  tr.label = sc.label;
  tr.scenario_hash = scenario_fingerprint(sc);
  tr.step = sc.integ.method == num::Method::RK45 ? 0.0 : sc.integ.step;
  tr.diverged = g.diverged;
  tr.t_diverged = g.t_diverged;
  return tr;
}

}  // namespace

Trajectory run(const Scenario& sc) {
  const StateIndex ix(sc.params);
  const int n = ix.n();
  const int m = ix.m();
  if (sc.x0.size() != n) throw ConfigError("run: x0 dimension mismatch");
  if (!sc.x0.allFinite()) throw ConfigError("run: x0 must be finite");
  if (sc.u_const.size() != m) {
    throw ConfigError("run: u_const dimension mismatch");
  }
  if (!(sc.t_end > 0.0)) throw ConfigError("run: t_end must be positive");
  if (!(sc.record_stride > 0.0)) {
    throw ConfigError("run: record stride must be positive");
  }
  const bool fixed_step = sc.integ.method != num::Method::RK45;
  if (fixed_step && !(sc.integ.step > 0.0)) {
    throw ConfigError("run: integrator step must be positive");
  }
  if (fixed_step && sc.record_stride < sc.integ.step - kTimeTol) {
    throw ConfigError("run: record stride below the integrator step");
  }

  const bool lifted_route = sc.route == SimRoute::Lifted;
  const DynamicsMode dmode = sc.route == SimRoute::Full
                                 ? DynamicsMode::Full
                                 : DynamicsMode::Surrogate;
  const Model model(sc.params, dmode);
  std::optional<LiftedModel> lm;
  if (lifted_route || sc.lqi) lm.emplace(sc.params);

  const bool closed_loop = sc.lqi.has_value();
  if (closed_loop) {
    if (!(sc.t_engage >= 0.0 && sc.t_engage <= sc.t_end)) {
      throw ConfigError("run: t_engage outside the time span");
    }
    if (!fixed_step) {
      throw ConfigError("run: closed-loop runs need a fixed-step method");
    }
    if (sc.lqi->model_fingerprint != model_fingerprint(*lm)) {
      throw ConfigError("run: controller was synthesized for another model");
    }
    if (!sc.lqi->has_recovery()) {
      throw ConfigError("run: controller carries no physical recovery data");
    }
  }

  // warmup: short explicit segment covering the algebraic-init transient
  const bool etd = sc.integ.method == num::Method::ETD2;
  double warmup_end = etd ? std::min(sc.integ.warmup_time, sc.t_end) : 0.0;
  double h_warm = sc.integ.warmup_step;
  if (etd && warmup_end > 0.0 && h_warm <= 0.0) {
    const Eigen::MatrixXd j0 = model.rhs_jacobian(sc.x0, sc.u_const);
    double gersh = 0.0;
    for (int r = 0; r < j0.rows(); ++r) {
      gersh = std::max(gersh, j0.row(r).cwiseAbs().sum());
    }
    h_warm = gersh > 0.0 ? 2.0 / gersh : sc.integ.step;
  }

  const auto events = build_events(sc, closed_loop, warmup_end);

  Eigen::VectorXd x = sc.x0;
  Eigen::VectorXd u_vec = sc.u_const;
  Eigen::VectorXd z_i = Eigen::VectorXd::Zero(m);
  bool engaged = false;
  StepperCache cache;
  const num::OdeFun f = [&](double, const Eigen::VectorXd& xs,
                            Eigen::VectorXd& dx) { model.rhs(xs, u_vec, dx); };

  const auto vod = [&](const Eigen::VectorXd& xs) {
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) y[i] = xs[ix.der(i, kVoD)];
    return y;
  };
  const auto state_ok = [](const Eigen::VectorXd& xs) {
    return xs.allFinite() && xs.cwiseAbs().maxCoeff() < 1e12;
  };

  RunGuts g;
  const auto record = [&](double tk) {
    g.t.push_back(tk);
    g.x.push_back(x);
    g.y.push_back(vod(x));
    if (engaged) {
      const ControlStep cs = control_step(*sc.lqi, *lm, x, z_i, u_vec);
      g.u.push_back(cs.u);
      g.ul.push_back(cs.u_lifted);
    } else {
      g.u.push_back(u_vec);
      if (lm) g.ul.push_back(lm->lifted_input(x, u_vec));
    }
    if (lifted_route) g.z.push_back(lm->lift(x, g.u.back()));
  };

  double t = 0.0;
  for (const auto& [te, bits] : events) {
    // march t -> te
    if (sc.integ.method == num::Method::RK45 && te > t + kTimeTol) {
      try {
        num::integrate_rk45(f, t, te, sc.integ.rel_tol, sc.integ.abs_tol, x);
      } catch (const NumericError&) {
        g.diverged = true;
        g.t_diverged = t;
      }
      if (!g.diverged && !state_ok(x)) {
        g.diverged = true;
        g.t_diverged = t;
      }
    } else {
      while (t < te - kTimeTol) {
        const bool warm = etd && t < warmup_end - kTimeTol;
        const double h_max = warm ? h_warm : sc.integ.step;
        const double h = std::min(h_max, te - t);
        Eigen::VectorXd y_pre;
        if (engaged) {
          u_vec = control_step(*sc.lqi, *lm, x, z_i, u_vec).u;
          y_pre = vod(x);
        }
        if (etd && !warm) {
          cache.get(h).step(f, t, x);
        } else {
          num::rk4_step(f, t, h, x);
        }
        if (!state_ok(x)) {
          g.diverged = true;
          g.t_diverged = t;  // last finite step boundary
          break;
        }
        t += h;
        if (engaged) {
          z_i += 0.5 * h *
                 ((sc.lqi->y_ref - y_pre) + (sc.lqi->y_ref - vod(x)));
        }
      }
    }
    if (g.diverged) break;
    t = te;
    if (bits & kEvEngage) {
      engaged = true;
      z_i.setZero();
      u_vec = control_step(*sc.lqi, *lm, x, z_i, u_vec).u;
    }
    if (etd && (bits & kEvRefresh) && t >= warmup_end - kTimeTol) {
      cache.refresh(model.rhs_jacobian(x, u_vec));
    }
    if (bits & kEvRecord) record(t);
  }

  Trajectory tr = assemble(sc, g, n, lifted_route ? lm->N : 0,
                           lm ? lm->M : 0);
  return tr;
}

PairResult run_pair(const Scenario& sc) {
  Scenario phys = sc;
  if (phys.route == SimRoute::Lifted) phys.route = SimRoute::Full;
  Scenario lift = sc;
  lift.route = SimRoute::Lifted;
  PairResult pr{run(phys), run(lift)};
  return pr;
}

namespace {

BatchRun one_batch_run(const Scenario& sc, const StateIndex& ix,
                       std::uint64_t seed, int r) {
  BatchRun br;
  br.run = r;
  br.stream = batch_stream(seed, r);
  Scenario s = sc;
  s.x0 = perturb_initial_state(sc.x0, sc.perturb_fraction, br.stream, ix);
  br.x0 = s.x0;

  const PairResult pr = run_pair(s);
  br.diverged_physical = pr.physical.diverged;
  br.diverged_lifted = pr.lifted.diverged;
  if (pr.physical.diverged) br.t_diverged = pr.physical.t_diverged;
  if (pr.lifted.diverged) {
    br.t_diverged = br.t_diverged > 0.0
                        ? std::min(br.t_diverged, pr.lifted.t_diverged)
                        : pr.lifted.t_diverged;
  }
  const int s_common = std::min(pr.physical.samples(), pr.lifted.samples());
  br.mae_series.resize(s_common);
  for (int k = 0; k < s_common; ++k) {
    const double mae =
        (pr.physical.x.col(k) - pr.lifted.x.col(k)).cwiseAbs().mean();
    br.mae_series[k] = mae;
    br.mae_max = std::max(br.mae_max, mae);
    if (k == s_common - 1) br.mae_final = mae;
  }
  return br;
}

BatchResult run_batch_impl(const Scenario& sc, int n_runs, std::uint64_t seed,
                           bool parallel) {
  if (n_runs <= 0) throw ConfigError("run_batch: n_runs must be positive");
  if (!(sc.record_stride > 0.0) || !(sc.t_end > 0.0))
    throw ConfigError("run_batch: record stride and span must be positive");
  const StateIndex ix(sc.params);
  BatchResult out;
  out.seed = seed;
  out.fraction = sc.perturb_fraction;
  out.runs.resize(n_runs);
  {  // the shared record grid, mirroring build_events
    const double stride = sc.record_stride;
    const int n_rec =
        static_cast<int>(std::floor(sc.t_end / stride + kTimeTol));
    const bool tail = n_rec * stride < sc.t_end - kTimeTol;
    out.times.resize(n_rec + 1 + (tail ? 1 : 0));
    for (int k = 0; k <= n_rec; ++k) out.times[k] = k * stride;
    if (tail) out.times[n_rec + 1] = sc.t_end;
  }

  std::exception_ptr first_error;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int r = 0; r < n_runs; ++r) {
    try {
      out.runs[r] = one_batch_run(sc, ix, seed, r);
    } catch (...) {
#pragma omp critical
      {
        if (!first_error) first_error = std::current_exception();
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace

BatchResult run_batch(const Scenario& sc, int n_runs, std::uint64_t seed) {
  return run_batch_impl(sc, n_runs, seed, true);
}

BatchResult run_batch_serial(const Scenario& sc, int n_runs,
                             std::uint64_t seed) {
  return run_batch_impl(sc, n_runs, seed, false);
}

}  // namespace mglift
