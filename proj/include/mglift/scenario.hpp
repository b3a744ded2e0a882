/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_SCENARIO_HPP
#define MGLIFT_SCENARIO_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mglift/control.hpp"
#include "mglift/lift.hpp"
#include "mglift/model.hpp"
#include "mglift/numerics.hpp"
#include "mglift/params.hpp"
#include "mglift/state.hpp"

namespace mglift {

// Which route a run integrates.  `Lifted` is the manifold-equivalent lifted
// route: the surrogate mirror is integrated and the exact lifted state
// z = g(x~) is read off at the sample times, so the recorded z solves the
// linear image z' = A z + B U along the trajectory without integrating the
// 70-dimensional system directly (whose transverse modes overflow doubles).
enum class SimRoute { Full, Surrogate, Lifted };

// A complete simulation request: plant, start point, input schedule
// (constant setpoints until t_engage, then the LQI loop when a controller is
// attached), horizon, and recording grid.
struct Scenario {
  MgParams params;
  SimRoute route = SimRoute::Full;
  Eigen::VectorXd x0;       // full initial state (n)
  Eigen::VectorXd u_const;  // rest voltage setpoints (m)
  std::optional<LqiController> lqi;  // engaged from t_engage when present
  double t_engage = 1.0;
  double t_end = 5.0;
  double record_stride = 1e-3;
  double perturb_fraction = 0.0;  // batch initial-state spread, e.g. 0.3
  num::IntegratorSpec integ;      // t_span is ignored; [0, t_end] governs
  std::string label;
};

// Recorded run.  Columns are sample times; a diverged run is truncated to
// the last finite sample and flagged.  For the lifted route `x` holds the
// surrogate mirror state (identical to the state-resident observables of z).
struct Trajectory {
  Eigen::VectorXd t;
  Eigen::MatrixXd x;         // n x S
  Eigen::MatrixXd z;         // N x S (lifted route), else 0 x 0
  Eigen::MatrixXd u;         // m x S physical setpoints in effect
  Eigen::MatrixXd u_lifted;  // M x S commanded/consistent lifted input when a
                             // lifted model is in play, else 0 x 0
  Eigen::MatrixXd y;         // m x S   d-axis output voltages
  std::string label;
  std::uint64_t scenario_hash = 0;
  std::uint64_t seed = 0;  // batch stream id, 0 for direct runs
  double step = 0.0;       // macro step of the integrator
  bool diverged = false;
  double t_diverged = 0.0;

  int samples() const { return static_cast<int>(t.size()); }
};

Trajectory run(const Scenario& scenario);

// The same scenario through the physical route (as configured) and the
// lifted route; each leg evaluates any control law from its own state.
struct PairResult {
  Trajectory physical;
  Trajectory lifted;
};

PairResult run_pair(const Scenario& scenario);

// Monte-Carlo batch: n_runs independent initial-state perturbations of
// scenario.x0 (scenario.perturb_fraction), each run_pair'd; per-run error
// summaries instead of trajectories.  Runs are deterministic functions of
// (seed, run index) regardless of scheduling, so the parallel and serial
// drivers agree bitwise.
struct BatchRun {
  int run = 0;
  std::uint64_t stream = 0;  // per-run RNG stream
  Eigen::VectorXd x0;        // perturbed start point
  bool diverged_physical = false;
  bool diverged_lifted = false;
  double t_diverged = 0.0;  // earliest divergence, 0 when none
  double mae_max = 0.0;     // max over common samples of mean |x - z_x|
  double mae_final = 0.0;   // at the last common sample
  Eigen::VectorXd mae_series;  // mean |x - z_x| per common sample
};

struct BatchResult {
  std::vector<BatchRun> runs;
  std::uint64_t seed = 0;
  double fraction = 0.0;
  Eigen::VectorXd times;  // record grid shared by the run error series
};

BatchResult run_batch(const Scenario& scenario, int n_runs,
                      std::uint64_t seed);
BatchResult run_batch_serial(const Scenario& scenario, int n_runs,
                             std::uint64_t seed);

// Per-run RNG stream id.
std::uint64_t batch_stream(std::uint64_t seed, int run);

// Multiplicative (1 + eps) spread with eps ~ U(-fraction, +fraction) drawn
// per entry; zero entries move additively by eps times the mean magnitude of
// their state class (per-DER symbol, line D/Q, RL-load D/Q).  The reference
// angle is re-zeroed afterwards: it is the frame gauge and not an observable
// of the lift.
Eigen::VectorXd perturb_initial_state(const Eigen::VectorXd& x0,
                                      double fraction, std::uint64_t stream,
                                      const StateIndex& ix);

// FNV-1a over the scenario's defining numbers; stamped into trajectories and
// batch manifests.
std::uint64_t scenario_fingerprint(const Scenario& scenario);

}  // namespace mglift

#endif  // MGLIFT_SCENARIO_HPP
