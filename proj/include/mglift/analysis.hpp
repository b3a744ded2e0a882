/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_ANALYSIS_HPP
#define MGLIFT_ANALYSIS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mglift/control.hpp"
#include "mglift/scenario.hpp"

namespace mglift {

// Mean absolute error between two state trajectories on a shared time grid,
// averaged over the n physical states at each sample.  Raw SI units, no
// per-state normalization: the scalar mixes volts, amperes, watts and
// radians on purpose so large-magnitude states dominate.
struct MaeSeries {
  Eigen::VectorXd times;
  Eigen::VectorXd mae;
  double final_value = 0.0;
  double max_value = 0.0;
  double t_max = 0.0;  // time of the maximum
};

// Both trajectories must carry identical time stamps and state dimensions;
// anything else throws ConfigError.
MaeSeries mae(const Trajectory& reference, const Trajectory& candidate);

// Dimensionless variant: each state's error is divided by that state's peak
// magnitude along the reference trajectory (floored at 1 to keep near-zero
// states, like angles, from dominating).  Separate metric from mae() -- the
// two are not comparable.
MaeSeries mae_normalized(const Trajectory& reference,
                         const Trajectory& candidate);

// Open- versus closed-loop spectra of the lifted plant.  The closed loop is
// the certificate loop A~ - B~ K on the output-integrator augmentation.
struct PoleReport {
  Eigen::VectorXcd open_loop;
  Eigen::VectorXcd closed_loop;
  double open_loop_abscissa = 0.0;
  double closed_loop_abscissa = 0.0;
  bool open_loop_stable = false;   // max Re < 0
  bool closed_loop_stable = false;
};

PoleReport pole_report(const Eigen::MatrixXd& a_open,
                       const Eigen::MatrixXd& a_closed);
PoleReport pole_report(const LiftedModel& model, const LqiController& ctrl);

// Per-state absolute errors at one recorded sample, dominant states first.
struct StateErrorBreakdown {
  double t = 0.0;                  // time stamp of the sample used
  std::vector<std::string> names;  // state names, trajectory order
  Eigen::VectorXd errors;          // |reference - candidate| per state
  std::vector<int> order;          // state indices, descending error
  double mae = 0.0;                // errors.mean(), matches MaeSeries here
};

StateErrorBreakdown state_error_breakdown(const Trajectory& reference,
                                          const Trajectory& candidate,
                                          const StateIndex& ix, double t);

// Largest per-channel output deviation from a reference past t_from;
// the closed-loop steady-state tracking metric.
struct TrackingReport {
  Eigen::VectorXd max_error;  // per output channel, over t >= t_from
  double worst = 0.0;
  double t_from = 0.0;
};

TrackingReport tracking_error(const Trajectory& traj,
                              const Eigen::VectorXd& y_ref, double t_from);

// Ensemble roll-up of a perturbation batch.
struct BatchSummary {
  int runs = 0;
  int diverged = 0;
  double mae_max_low = 0.0;    // min over runs of each run's peak MAE
  double mae_max_high = 0.0;   // max over runs
  double mae_final_low = 0.0;
  double mae_final_high = 0.0;
  double mae_final_mean = 0.0;
  bool all_below(double bound) const;
};

BatchSummary summarize_batch(const BatchResult& batch);

// Human-readable report blocks for the command-line surface.
std::string summarize(const MaeSeries& series);
std::string summarize(const PoleReport& report);
std::string summarize(const StateErrorBreakdown& breakdown, int top_k = 6);
std::string summarize(const BatchSummary& summary);

}  // namespace mglift

#endif  // MGLIFT_ANALYSIS_HPP
