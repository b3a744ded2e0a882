/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numeric>

#include "mglift/errors.hpp"
#include "mglift/numerics.hpp"

namespace mglift {

namespace {

void check_aligned(const Trajectory& a, const Trajectory& b) {
  if (a.x.rows() != b.x.rows())
    throw ConfigError("mae: state dimensions differ");
  if (a.samples() != b.samples())
    throw ConfigError("mae: sample counts differ");
  for (int k = 0; k < a.samples(); ++k) {
    if (std::abs(a.t[k] - b.t[k]) > 1e-9)
      throw ConfigError("mae: time grids differ");
  }
}

MaeSeries reduce_series(const Trajectory& a, const Eigen::MatrixXd& err) {
  MaeSeries s;
  s.times = a.t;
  s.mae = err.colwise().mean().transpose();
  const int last = static_cast<int>(s.mae.size()) - 1;
  s.final_value = last >= 0 ? s.mae[last] : 0.0;
  if (last >= 0) {
    Eigen::Index at = 0;
    s.max_value = s.mae.maxCoeff(&at);
    s.t_max = s.times[at];
  }
  return s;
}

}  // namespace

MaeSeries mae(const Trajectory& reference, const Trajectory& candidate) {
  check_aligned(reference, candidate);
  return reduce_series(reference, (reference.x - candidate.x).cwiseAbs());
}

MaeSeries mae_normalized(const Trajectory& reference,
                         const Trajectory& candidate) {
  check_aligned(reference, candidate);
  Eigen::VectorXd scale =
      reference.x.cwiseAbs().rowwise().maxCoeff().cwiseMax(1.0);
  Eigen::MatrixXd err =
      scale.cwiseInverse().asDiagonal() * (reference.x - candidate.x);
  return reduce_series(reference, err.cwiseAbs());
}

PoleReport pole_report(const Eigen::MatrixXd& a_open,
                       const Eigen::MatrixXd& a_closed) {
  PoleReport r;
  r.open_loop = num::eigenvalues(a_open);
  r.closed_loop = num::eigenvalues(a_closed);
  r.open_loop_abscissa = r.open_loop.real().maxCoeff();
  r.closed_loop_abscissa = r.closed_loop.real().maxCoeff();
  r.open_loop_stable = r.open_loop_abscissa < 0.0;
  r.closed_loop_stable = r.closed_loop_abscissa < 0.0;
  return r;
}

PoleReport pole_report(const LiftedModel& model, const LqiController& ctrl) {
  const AugmentedSystem aug = augment(model);
  if (ctrl.k.rows() != aug.b_tilde.cols() ||
      ctrl.k.cols() != aug.a_tilde.cols())
    throw ConfigError("pole_report: controller does not match the model");
  return pole_report(model.A, aug.a_tilde - aug.b_tilde * ctrl.k);
}

StateErrorBreakdown state_error_breakdown(const Trajectory& reference,
                                          const Trajectory& candidate,
                                          const StateIndex& ix, double t) {
  check_aligned(reference, candidate);
  if (reference.samples() == 0)
    throw ConfigError("state_error_breakdown: empty trajectory");
  if (reference.x.rows() != ix.n())
    throw ConfigError("state_error_breakdown: index does not match states");
  if (t < reference.t[0] - 1e-9 ||
      t > reference.t[reference.samples() - 1] + 1e-9)
    throw ConfigError("state_error_breakdown: time outside the record");
  int at = 0;
  double best = std::abs(reference.t[0] - t);
  for (int k = 1; k < reference.samples(); ++k) {
    double d = std::abs(reference.t[k] - t);
    if (d < best) { best = d; at = k; }
  }

  StateErrorBreakdown b;
  b.t = reference.t[at];
  b.names = ix.names();
  b.errors = (reference.x.col(at) - candidate.x.col(at)).cwiseAbs();
  b.mae = b.errors.mean();
  b.order.resize(static_cast<size_t>(b.errors.size()));
  std::iota(b.order.begin(), b.order.end(), 0);
  std::stable_sort(b.order.begin(), b.order.end(),
                   [&](int i, int j) { return b.errors[i] > b.errors[j]; });
  return b;
}

TrackingReport tracking_error(const Trajectory& traj,
                              const Eigen::VectorXd& y_ref, double t_from) {
  if (traj.y.rows() != y_ref.size())
    throw ConfigError("tracking_error: reference dimension mismatch");
  TrackingReport r;
  r.t_from = t_from;
  r.max_error = Eigen::VectorXd::Zero(y_ref.size());
  bool seen = false;
  for (int k = 0; k < traj.samples(); ++k) {
    if (traj.t[k] < t_from - 1e-9) continue;
    r.max_error =
        r.max_error.cwiseMax((traj.y.col(k) - y_ref).cwiseAbs());
    seen = true;
  }
  if (!seen) throw ConfigError("tracking_error: no samples past t_from");
  r.worst = r.max_error.maxCoeff();
  return r;
}

bool BatchSummary::all_below(double bound) const {
  return diverged == 0 && mae_max_high < bound;
}

BatchSummary summarize_batch(const BatchResult& batch) {
  BatchSummary s;
  s.runs = static_cast<int>(batch.runs.size());
  if (s.runs == 0) return s;
  s.mae_max_low = s.mae_final_low = 1e300;
  for (const BatchRun& r : batch.runs) {
    if (r.diverged_physical || r.diverged_lifted) {
      ++s.diverged;
      continue;
    }
    s.mae_max_low = std::min(s.mae_max_low, r.mae_max);
    s.mae_max_high = std::max(s.mae_max_high, r.mae_max);
    s.mae_final_low = std::min(s.mae_final_low, r.mae_final);
    s.mae_final_high = std::max(s.mae_final_high, r.mae_final);
    s.mae_final_mean += r.mae_final;
  }
  const int ok = s.runs - s.diverged;
  if (ok > 0) s.mae_final_mean /= ok;
  else s.mae_max_low = s.mae_final_low = 0.0;
  return s;
}

namespace {

std::string format_line(const char* fmt, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, fmt);
  vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

}  // namespace

std::string summarize(const MaeSeries& series) {
  std::string out = "model error (mean absolute, raw SI)\n";
  out += format_line("  samples      %d\n", int(series.times.size()));
  out += format_line("  peak         %.6g at t = %.6g s\n", series.max_value,
                     series.t_max);
  out += format_line("  final        %.6g\n", series.final_value);
  return out;
}

std::string summarize(const PoleReport& report) {
  std::string out = "pole comparison\n";
  out += format_line("  open loop    %d poles, max Re %.6g  [%s]\n",
                     int(report.open_loop.size()), report.open_loop_abscissa,
                     report.open_loop_stable ? "stable" : "not stable");
  out += format_line("  closed loop  %d poles, max Re %.6g  [%s]\n",
                     int(report.closed_loop.size()),
                     report.closed_loop_abscissa,
                     report.closed_loop_stable ? "stable" : "not stable");
  return out;
}

std::string summarize(const StateErrorBreakdown& breakdown, int top_k) {
  std::string out =
      format_line("state errors at t = %.6g s (mean %.6g)\n", breakdown.t,
                  breakdown.mae);
  const int k = std::min<int>(top_k, int(breakdown.order.size()));
  for (int i = 0; i < k; ++i) {
    const int s = breakdown.order[static_cast<size_t>(i)];
    out += format_line("  %-12s %.6g\n", breakdown.names[s].c_str(),
                       breakdown.errors[s]);
  }
  return out;
}

std::string summarize(const BatchSummary& summary) {
  std::string out = "perturbation ensemble\n";
  out += format_line("  runs         %d (%d diverged)\n", summary.runs,
                     summary.diverged);
  out += format_line("  peak MAE     [%.6g, %.6g]\n", summary.mae_max_low,
                     summary.mae_max_high);
  out += format_line("  final MAE    [%.6g, %.6g], mean %.6g\n",
                     summary.mae_final_low, summary.mae_final_high,
                     summary.mae_final_mean);
  return out;
}

}  // namespace mglift
