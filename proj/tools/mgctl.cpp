/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

// mgctl: command-line surface over the microgrid lifting toolkit.
//
//   simulate      run a scenario, write trajectory CSVs + manifest
//   design        synthesize the tracking controller, write gain + poles
//   analyze       numeric reports from previously written artifacts
//   plot          static SVG figures from previously written artifacts
//   export-model  dump the lifted (A, B, C) triple as CSV
//
// Exit codes: 0 ok, 1 usage, 2 config, 3 numeric (incl. divergence), 4 I/O.

#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "mglift/analysis.hpp"
#include "mglift/config.hpp"
#include "mglift/control.hpp"
#include "mglift/csv.hpp"
#include "mglift/errors.hpp"
#include "mglift/lift.hpp"
#include "mglift/model.hpp"
#include "mglift/scenario.hpp"
#include "mglift/svg.hpp"
#include "mglift/version.hpp"

using namespace mglift;
using nlohmann::ordered_json;

namespace {

struct Flags {
  std::string config_path;
  std::string out_dir = "out";
  std::string scenario = "open_loop";
  std::string mode = "full";
  std::string weights_path;
  std::uint64_t seed = 0;
  int runs = 50;
  double perturb = 0.3;
  double engage_time = -1.0;  // <0 -> config default
};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ISO-8601 UTC stamp; honors SOURCE_DATE_EPOCH for reproducible artifacts.
std::string timestamp() {
  std::time_t t;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
    t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  } else {
    t = std::time(nullptr);
  }
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

LqiWeights load_weights(const std::string& path) {
  LqiWeights w;
  if (path.empty()) return w;
  ordered_json j;
  try {
    j = ordered_json::parse(read_text_file(path));
  } catch (const ordered_json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  w.state = j.value("state", w.state);
  w.integrator = j.value("integrator", w.integrator);
  w.control = j.value("control", w.control);
  if (!(w.control > 0.0))
    throw ConfigError(path + ": control weight must be positive definite");
  if (w.state < 0.0 || w.integrator < 0.0)
    throw ConfigError(path + ": state weights must be non-negative");
  return w;
}

// Deterministic run identity: everything the artifacts depend on.
std::uint64_t run_identity(const Flags& f, const LoadedConfig& cfg,
                           const std::string& command) {
  std::string key = std::string(kVersion) + '|' + command + '|' + f.scenario +
                    '|' + f.mode + '|' + hex64(cfg.content_hash) + '|' +
                    std::to_string(f.seed) + '|' + std::to_string(f.runs) +
                    '|' + std::to_string(f.perturb) + '|' +
                    std::to_string(f.engage_time);
  if (!f.weights_path.empty()) key += '|' + read_text_file(f.weights_path);
  return fnv1a(key);
}

void write_manifest(const Flags& f, const LoadedConfig& cfg,
                    const std::string& command, std::uint64_t run_id,
                    const std::vector<std::string>& artifacts) {
  ordered_json m;
  m["tool"] = "mgctl";
  m["version"] = kVersion;
  m["command"] = command;
  m["run_id"] = hex64(run_id);
  m["config_path"] = f.config_path;
  m["config_name"] = cfg.name;
  m["config_hash"] = hex64(cfg.content_hash);
  m["scenario"] = f.scenario;
  m["mode"] = f.mode;
  m["seed"] = f.seed;
  m["runs"] = f.runs;
  m["perturb"] = f.perturb;
  m["engage_time"] =
      f.engage_time >= 0.0 ? f.engage_time : cfg.sim.engage_time;
  m["t_end"] = cfg.sim.t_end;
  m["weights"] = f.weights_path.empty() ? "default" : f.weights_path;
  m["out_dir"] = f.out_dir;
  m["created"] = timestamp();
  m["artifacts"] = artifacts;
  write_text_file(join(f.out_dir, "manifest.json"), m.dump(2) + "\n");
}

void write_artifact_csv(const std::string& path, const CsvTable& table,
                        std::uint64_t run_id) {
  write_text_file(path,
                  "# manifest=" + hex64(run_id) + "\n" + csv_string(table));
}

void write_artifact_svg(const std::string& path, const std::string& svg,
                        std::uint64_t run_id) {
  write_text_file(path, "<!-- manifest=" + hex64(run_id) + " -->\n" + svg);
}

CsvTable trajectory_table(const Trajectory& tr, const StateIndex& ix) {
  CsvTable t;
  t.header.push_back("t");
  for (const std::string& n : ix.names()) t.header.push_back(n);
  for (int j = 0; j < tr.u.rows(); ++j)
    t.header.push_back("u_" + std::to_string(j + 1));
  const int s = tr.samples();
  t.data.resize(s, 1 + ix.n() + static_cast<int>(tr.u.rows()));
  for (int k = 0; k < s; ++k) {
    t.data(k, 0) = tr.t[k];
    for (int i = 0; i < ix.n(); ++i) t.data(k, 1 + i) = tr.x(i, k);
    for (int j = 0; j < tr.u.rows(); ++j)
      t.data(k, 1 + ix.n() + j) = tr.u(j, k);
  }
  return t;
}

Scenario scenario_from(const Flags& f, const LoadedConfig& cfg,
                       const MgParams& params) {
  Scenario sc;
  sc.params = params;
  if (!cfg.has_initial)
    throw ConfigError(f.config_path + ": scenario needs an 'initial' block");
  sc.x0 = complete_initial_state(params, cfg.initial);
  sc.u_const = Eigen::Map<const Eigen::VectorXd>(
      cfg.sim.u.data(), static_cast<Eigen::Index>(cfg.sim.u.size()));
  sc.route = f.mode == "surrogate" ? SimRoute::Surrogate : SimRoute::Full;
  sc.t_end = cfg.sim.t_end;
  sc.record_stride = cfg.sim.record_stride;
  sc.t_engage = f.engage_time >= 0.0 ? f.engage_time : cfg.sim.engage_time;
  sc.integ = cfg.sim.integ;
  sc.label = cfg.name + ":" + f.scenario;
  return sc;
}

int check_divergence(const std::initializer_list<const Trajectory*>& trs) {
  for (const Trajectory* tr : trs) {
    if (tr->diverged) {
      fprintf(stderr, "mgctl: %s diverged at t = %.6g s\n", tr->label.c_str(),
              tr->t_diverged);
      return 3;
    }
  }
  return 0;
}

int cmd_simulate(const Flags& f) {
  if (f.scenario != "open_loop" && f.scenario != "closed_loop" &&
      f.scenario != "pair" && f.scenario != "batch")
    throw ConfigError("unknown scenario '" + f.scenario +
                      "' (open_loop, closed_loop, pair, batch)");
  const LoadedConfig cfg = load_config(f.config_path);
  const MgParams params = build_params(cfg.description);
  const StateIndex ix(params);
  const std::uint64_t run_id = run_identity(f, cfg, "simulate");
  ensure_dir(f.out_dir);

  if (f.scenario == "open_loop") {
    write_manifest(f, cfg, "simulate", run_id, {"trajectory.csv"});
    Scenario sc = scenario_from(f, cfg, params);
    Trajectory tr = run(sc);
    write_artifact_csv(join(f.out_dir, "trajectory.csv"),
                       trajectory_table(tr, ix), run_id);
    return check_divergence({&tr});
  }

  if (f.scenario == "closed_loop") {
    write_manifest(f, cfg, "simulate", run_id,
                   {"controller.json", "trajectory.csv"});
    const LiftedModel lm = build_lifted(params);
    const LqiWeights w = load_weights(f.weights_path);
    Eigen::VectorXd y_ref = Eigen::Map<const Eigen::VectorXd>(
        cfg.sim.u.data(), static_cast<Eigen::Index>(cfg.sim.u.size()));
    const LqiController ctrl = synthesize(lm, y_ref, w);
    save_controller(ctrl, join(f.out_dir, "controller.json"));
    Scenario sc = scenario_from(f, cfg, params);
    sc.lqi = ctrl;
    Trajectory tr = run(sc);
    write_artifact_csv(join(f.out_dir, "trajectory.csv"),
                       trajectory_table(tr, ix), run_id);
    return check_divergence({&tr});
  }

  if (f.scenario == "pair") {
    write_manifest(f, cfg, "simulate", run_id,
                   {"physical.csv", "lifted.csv"});
    Scenario sc = scenario_from(f, cfg, params);
    PairResult pr = run_pair(sc);
    write_artifact_csv(join(f.out_dir, "physical.csv"),
                       trajectory_table(pr.physical, ix), run_id);
    write_artifact_csv(join(f.out_dir, "lifted.csv"),
                       trajectory_table(pr.lifted, ix), run_id);
    return check_divergence({&pr.physical, &pr.lifted});
  }

  if (f.scenario == "batch") {
    write_manifest(f, cfg, "simulate", run_id,
                   {"batch_summary.csv", "batch_mae.csv"});
    Scenario sc = scenario_from(f, cfg, params);
    sc.perturb_fraction = f.perturb;
    BatchResult br = run_batch(sc, f.runs, f.seed);

    CsvTable summary;
    summary.header = {"run",         "stream",          "diverged_physical",
                      "diverged_lifted", "t_diverged",  "mae_max",
                      "mae_final"};
    summary.data.resize(static_cast<int>(br.runs.size()), 7);
    for (size_t r = 0; r < br.runs.size(); ++r) {
      const BatchRun& b = br.runs[r];
      const auto i = static_cast<Eigen::Index>(r);
      summary.data(i, 0) = b.run;
      summary.data(i, 1) = static_cast<double>(b.stream);
      summary.data(i, 2) = b.diverged_physical ? 1.0 : 0.0;
      summary.data(i, 3) = b.diverged_lifted ? 1.0 : 0.0;
      summary.data(i, 4) = b.t_diverged;
      summary.data(i, 5) = b.mae_max;
      summary.data(i, 6) = b.mae_final;
    }
    write_artifact_csv(join(f.out_dir, "batch_summary.csv"), summary, run_id);

    CsvTable curves;
    curves.header.push_back("t");
    for (size_t r = 0; r < br.runs.size(); ++r)
      curves.header.push_back("run_" + std::to_string(r));
    curves.data.resize(br.times.size(),
                       1 + static_cast<Eigen::Index>(br.runs.size()));
    curves.data.col(0) = br.times;
    for (size_t r = 0; r < br.runs.size(); ++r) {
      const Eigen::VectorXd& s = br.runs[r].mae_series;
      for (Eigen::Index k = 0; k < br.times.size(); ++k)
        curves.data(k, 1 + static_cast<Eigen::Index>(r)) =
            k < s.size() ? s[k] : std::nan("");  // truncated: diverged run
    }
    write_artifact_csv(join(f.out_dir, "batch_mae.csv"), curves, run_id);

    int diverged = 0;
    for (const BatchRun& b : br.runs)
      if (b.diverged_physical || b.diverged_lifted) ++diverged;
    if (diverged > 0) {
      fprintf(stderr, "mgctl: %d of %d batch runs diverged\n", diverged,
              f.runs);
      return 3;
    }
  }
  return 0;
}

int cmd_design(const Flags& f) {
  const LoadedConfig cfg = load_config(f.config_path);
  const MgParams params = build_params(cfg.description);
  const std::uint64_t run_id = run_identity(f, cfg, "design");
  ensure_dir(f.out_dir);
  write_manifest(f, cfg, "design", run_id, {"controller.json", "poles.csv"});

  const LiftedModel lm = build_lifted(params);
  const LqiWeights w = load_weights(f.weights_path);
  Eigen::VectorXd y_ref = Eigen::Map<const Eigen::VectorXd>(
      cfg.sim.u.data(), static_cast<Eigen::Index>(cfg.sim.u.size()));
  const LqiController ctrl = synthesize(lm, y_ref, w);

  // stamp the gain file with the manifest reference
  save_controller(ctrl, join(f.out_dir, "controller.json"));
  ordered_json cj = ordered_json::parse(
      read_text_file(join(f.out_dir, "controller.json")));
  cj["manifest"] = hex64(run_id);
  write_text_file(join(f.out_dir, "controller.json"), cj.dump(2) + "\n");

  const PoleReport rep = pole_report(lm, ctrl);
  CsvTable poles;
  poles.header = {"re", "im", "closed_loop"};
  poles.data.resize(rep.open_loop.size() + rep.closed_loop.size(), 3);
  for (Eigen::Index i = 0; i < rep.open_loop.size(); ++i) {
    poles.data(i, 0) = rep.open_loop[i].real();
    poles.data(i, 1) = rep.open_loop[i].imag();
    poles.data(i, 2) = 0.0;
  }
  for (Eigen::Index i = 0; i < rep.closed_loop.size(); ++i) {
    const Eigen::Index r = rep.open_loop.size() + i;
    poles.data(r, 0) = rep.closed_loop[i].real();
    poles.data(r, 1) = rep.closed_loop[i].imag();
    poles.data(r, 2) = 1.0;
  }
  write_artifact_csv(join(f.out_dir, "poles.csv"), poles, run_id);

  fputs(summarize(rep).c_str(), stdout);
  printf("gain rows %d, cols %d; care residual %.3e\n", int(ctrl.k.rows()),
         int(ctrl.k.cols()), ctrl.care_residual);
  return 0;
}

Trajectory trajectory_from_table(const CsvTable& t, const StateIndex& ix) {
  Trajectory tr;
  if (t.rows() == 0) throw IoError("empty trajectory artifact");
  const int tc = t.column("t");
  tr.t = t.data.col(tc);
  tr.x.resize(ix.n(), t.rows());
  const auto& names = ix.names();
  for (int i = 0; i < ix.n(); ++i)
    tr.x.row(i) = t.data.col(t.column(names[static_cast<size_t>(i)]))
                      .transpose();
  int m = 0;
  while (true) {
    try {
      t.column("u_" + std::to_string(m + 1));
      ++m;
    } catch (const ConfigError&) {
      break;
    }
  }
  tr.u.resize(m, t.rows());
  for (int j = 0; j < m; ++j)
    tr.u.row(j) =
        t.data.col(t.column("u_" + std::to_string(j + 1))).transpose();
  tr.y.resize(ix.m(), t.rows());
  for (int i = 0; i < ix.m(); ++i)
    tr.y.row(i) = tr.x.row(ix.der(i, kVoD));
  return tr;
}

int cmd_analyze(const Flags& f) {
  const LoadedConfig cfg = load_config(f.config_path);
  const MgParams params = build_params(cfg.description);
  const StateIndex ix(params);
  const std::uint64_t run_id = run_identity(f, cfg, "analyze");

  const std::string phys_path = join(f.out_dir, "physical.csv");
  const std::string lift_path = join(f.out_dir, "lifted.csv");
  const std::string traj_path = join(f.out_dir, "trajectory.csv");
  const std::string ctrl_path = join(f.out_dir, "controller.json");
  const bool have_pair = std::filesystem::exists(phys_path) &&
                         std::filesystem::exists(lift_path);
  const bool have_traj = std::filesystem::exists(traj_path);
  const bool have_ctrl = std::filesystem::exists(ctrl_path);
  if (!have_pair && !have_traj && !have_ctrl)
    throw IoError("no artifacts to analyze in " + f.out_dir);

  std::vector<std::string> artifacts = {"summary.txt"};
  if (have_pair) {
    artifacts.push_back("mae.csv");
    artifacts.push_back("breakdown.csv");
  }
  if (have_ctrl) artifacts.push_back("poles.csv");
  write_manifest(f, cfg, "analyze", run_id, artifacts);

  std::string report;
  if (have_pair) {
    const Trajectory phys = trajectory_from_table(read_csv(phys_path), ix);
    const Trajectory lift = trajectory_from_table(read_csv(lift_path), ix);
    const MaeSeries raw = mae(phys, lift);
    const MaeSeries norm = mae_normalized(phys, lift);
    CsvTable mt;
    mt.header = {"t", "mae", "mae_normalized"};
    mt.data.resize(raw.times.size(), 3);
    mt.data.col(0) = raw.times;
    mt.data.col(1) = raw.mae;
    mt.data.col(2) = norm.mae;
    write_artifact_csv(join(f.out_dir, "mae.csv"), mt, run_id);

    const double t_last = raw.times[raw.times.size() - 1];
    const StateErrorBreakdown bd =
        state_error_breakdown(phys, lift, ix, t_last);
    CsvTable bt;
    bt.header = {"state_index", "error"};
    bt.data.resize(bd.errors.size(), 2);
    for (Eigen::Index i = 0; i < bd.errors.size(); ++i) {
      bt.data(i, 0) = static_cast<double>(i);
      bt.data(i, 1) = bd.errors[i];
    }
    write_artifact_csv(join(f.out_dir, "breakdown.csv"), bt, run_id);

    report += summarize(raw);
    report += summarize(bd, 6);
  }

  Trajectory traj;
  if (have_traj)  // validate even without a controller: empty files are I/O
    traj = trajectory_from_table(read_csv(traj_path), ix);

  if (have_ctrl) {
    const LiftedModel lm = build_lifted(params);
    const LqiController ctrl = load_controller(ctrl_path);
    const PoleReport rep = pole_report(lm, ctrl);
    CsvTable poles;
    poles.header = {"re", "im", "closed_loop"};
    poles.data.resize(rep.open_loop.size() + rep.closed_loop.size(), 3);
    for (Eigen::Index i = 0; i < rep.open_loop.size(); ++i) {
      poles.data(i, 0) = rep.open_loop[i].real();
      poles.data(i, 1) = rep.open_loop[i].imag();
      poles.data(i, 2) = 0.0;
    }
    for (Eigen::Index i = 0; i < rep.closed_loop.size(); ++i) {
      const Eigen::Index r = rep.open_loop.size() + i;
      poles.data(r, 0) = rep.closed_loop[i].real();
      poles.data(r, 1) = rep.closed_loop[i].imag();
      poles.data(r, 2) = 1.0;
    }
    write_artifact_csv(join(f.out_dir, "poles.csv"), poles, run_id);
    report += summarize(rep);

    if (have_traj) {
      const Trajectory tr = trajectory_from_table(read_csv(traj_path), ix);
      const TrackingReport track =
          tracking_error(tr, ctrl.y_ref, cfg.sim.t_end - 1.0);
      report += "voltage tracking (closed loop)\n";
      char line[128];
      snprintf(line, sizeof line,
               "  worst |v - ref| over t >= %.6g s: %.6g V\n", track.t_from,
               track.worst);
      report += line;
    }
  }

  write_text_file(join(f.out_dir, "summary.txt"), report);
  fputs(report.c_str(), stdout);
  return 0;
}

int cmd_plot(const Flags& f) {
  const LoadedConfig cfg = load_config(f.config_path);
  const MgParams params = build_params(cfg.description);
  const StateIndex ix(params);
  const std::uint64_t run_id = run_identity(f, cfg, "plot");

  const std::string traj_path = join(f.out_dir, "trajectory.csv");
  const std::string phys_path = join(f.out_dir, "physical.csv");
  const std::string mae_path = join(f.out_dir, "mae.csv");
  const std::string batch_path = join(f.out_dir, "batch_mae.csv");
  const std::string bd_path = join(f.out_dir, "breakdown.csv");
  const std::string poles_path = join(f.out_dir, "poles.csv");

  std::vector<std::string> artifacts;
  const bool have_traj = std::filesystem::exists(traj_path) ||
                         std::filesystem::exists(phys_path);
  if (have_traj) artifacts.push_back("voltages.svg");
  if (std::filesystem::exists(mae_path) ||
      std::filesystem::exists(batch_path))
    artifacts.push_back("mae.svg");
  if (std::filesystem::exists(bd_path)) artifacts.push_back("errors.svg");
  if (std::filesystem::exists(poles_path)) artifacts.push_back("poles.svg");
  if (artifacts.empty()) throw IoError("no artifacts to plot in " + f.out_dir);
  write_manifest(f, cfg, "plot", run_id, artifacts);

  if (have_traj) {
    const std::string src =
        std::filesystem::exists(traj_path) ? traj_path : phys_path;
    const CsvTable t = read_csv(src);
    if (t.rows() == 0) throw IoError("empty trajectory artifact: " + src);
    std::vector<PlotSeries> series;
    for (int i = 0; i < ix.m(); ++i) {
      PlotSeries s;
      s.label = "v_od " + std::to_string(i + 1);
      s.x = t.data.col(t.column("t"));
      s.y = t.data.col(t.column("v_od_" + std::to_string(i + 1)));
      series.push_back(std::move(s));
    }
    PlotSpec spec;
    spec.title = "DER output voltages";
    spec.x_label = "t [s]";
    spec.y_label = "v_od [V]";
    write_artifact_svg(join(f.out_dir, "voltages.svg"),
                       render_plot(spec, series), run_id);
  }

  if (std::filesystem::exists(mae_path) ||
      std::filesystem::exists(batch_path)) {
    std::vector<PlotSeries> series;
    if (std::filesystem::exists(batch_path)) {
      const CsvTable t = read_csv(batch_path);
      if (t.rows() == 0) throw IoError("empty batch artifact");
      const Eigen::VectorXd ts = t.data.col(t.column("t"));
      for (size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c] == "t") continue;
        PlotSeries s;
        s.color = "#1f77b466";  // translucent overlay
        Eigen::VectorXd y = t.data.col(static_cast<Eigen::Index>(c));
        Eigen::Index good = y.size();  // truncated runs end in nan padding
        while (good > 0 && !std::isfinite(y[good - 1])) --good;
        if (good == 0) continue;
        s.x = ts.head(good);
        s.y = y.head(good);
        series.push_back(std::move(s));
      }
    } else {
      const CsvTable t = read_csv(mae_path);
      if (t.rows() == 0) throw IoError("empty error-series artifact");
      PlotSeries s;
      s.label = "MAE";
      s.x = t.data.col(t.column("t"));
      s.y = t.data.col(t.column("mae"));
      series.push_back(std::move(s));
    }
    PlotSpec spec;
    spec.title = "model error";
    spec.x_label = "t [s]";
    spec.y_label = "MAE";
    spec.legend = series.size() == 1;
    write_artifact_svg(join(f.out_dir, "mae.svg"), render_plot(spec, series),
                       run_id);
  }

  if (std::filesystem::exists(bd_path)) {
    const CsvTable t = read_csv(bd_path);
    if (t.rows() != ix.n())
      throw ConfigError("breakdown artifact does not match the system");
    PlotSpec spec;
    spec.title = "per-state absolute error";
    spec.y_label = "|error|";
    spec.width = 900;
    write_artifact_svg(
        join(f.out_dir, "errors.svg"),
        render_bars(spec, ix.names(), t.data.col(t.column("error"))), run_id);
  }

  if (std::filesystem::exists(poles_path)) {
    const CsvTable t = read_csv(poles_path);
    if (t.rows() == 0) throw IoError("empty pole artifact");
    PlotSeries open, closed;
    open.label = "open loop";
    open.line = false;
    open.markers = true;
    closed.label = "closed loop";
    closed.line = false;
    closed.markers = true;
    std::vector<double> ox, oy, cx, cy;
    for (int r = 0; r < t.rows(); ++r) {
      if (t.data(r, t.column("closed_loop")) > 0.5) {
        cx.push_back(t.data(r, t.column("re")));
        cy.push_back(t.data(r, t.column("im")));
      } else {
        ox.push_back(t.data(r, t.column("re")));
        oy.push_back(t.data(r, t.column("im")));
      }
    }
    auto to_vec = [](const std::vector<double>& v) {
      return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                               static_cast<Eigen::Index>(
                                                   v.size()));
    };
    open.x = to_vec(ox);
    open.y = to_vec(oy);
    closed.x = to_vec(cx);
    closed.y = to_vec(cy);
    PlotSpec spec;
    spec.title = "pole comparison";
    spec.x_label = "Re";
    spec.y_label = "Im";
    std::vector<PlotSeries> series;
    if (open.x.size() > 0) series.push_back(std::move(open));
    if (closed.x.size() > 0) series.push_back(std::move(closed));
    write_artifact_svg(join(f.out_dir, "poles.svg"),
                       render_plot(spec, series), run_id);
  }
  return 0;
}

int cmd_export_model(const Flags& f) {
  const LoadedConfig cfg = load_config(f.config_path);
  const MgParams params = build_params(cfg.description);
  const std::uint64_t run_id = run_identity(f, cfg, "export-model");
  ensure_dir(f.out_dir);
  write_manifest(f, cfg, "export-model", run_id,
                 {"a_matrix.csv", "b_matrix.csv", "c_matrix.csv",
                  "model.json"});

  const LiftedModel lm = build_lifted(params);
  const int m = params.m();
  const int nnet = static_cast<int>(lm.B.cols()) - 3 * m;

  CsvTable a;
  a.header = lm.obs_names;
  a.data = lm.A;
  write_artifact_csv(join(f.out_dir, "a_matrix.csv"), a, run_id);

  CsvTable b;
  for (int j = 0; j < m; ++j) b.header.push_back("u_" + std::to_string(j + 1));
  for (int j = 0; j < 2 * m; ++j)
    b.header.push_back("U_pq_" + std::to_string(j + 1));
  for (int j = 0; j < nnet; ++j)
    b.header.push_back("U_net_" + std::to_string(j + 1));
  b.data = lm.B;
  write_artifact_csv(join(f.out_dir, "b_matrix.csv"), b, run_id);

  CsvTable c;
  c.header = lm.obs_names;
  c.data = lm.C;
  write_artifact_csv(join(f.out_dir, "c_matrix.csv"), c, run_id);

  ordered_json mj;
  mj["manifest"] = hex64(run_id);
  mj["n"] = params.m() * kDerStates + 2 * params.q() + 2 * params.p();
  mj["n_lift"] = static_cast<int>(lm.A.rows());
  mj["n_input"] = static_cast<int>(lm.B.cols());
  mj["m"] = params.m();
  mj["q"] = params.q();
  mj["p"] = params.p();
  write_text_file(join(f.out_dir, "model.json"), mj.dump(2) + "\n");
  printf("lifted model: N=%d, M=%d\n", int(lm.A.rows()), int(lm.B.cols()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"microgrid lifting toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", f.config_path, "config file (JSON)")
        ->required();
    cmd->add_option("--out", f.out_dir, "output directory");
  };

  CLI::App* sim = app.add_subcommand("simulate", "run a scenario");
  add_common(sim);
  sim->add_option("--scenario", f.scenario,
                  "open_loop | closed_loop | pair | batch");
  sim->add_option("--mode", f.mode, "full | surrogate")
      ->check(CLI::IsMember({"full", "surrogate"}));
  sim->add_option("--seed", f.seed, "batch RNG seed");
  sim->add_option("--runs", f.runs, "batch size");
  sim->add_option("--perturb", f.perturb, "batch perturbation fraction");
  sim->add_option("--engage-time", f.engage_time, "controller engage time");
  sim->add_option("--weights", f.weights_path, "LQI weights file (JSON)");

  CLI::App* des = app.add_subcommand("design", "synthesize the controller");
  add_common(des);
  des->add_option("--weights", f.weights_path, "LQI weights file (JSON)");

  CLI::App* ana = app.add_subcommand("analyze", "reports from artifacts");
  add_common(ana);

  CLI::App* plt = app.add_subcommand("plot", "figures from artifacts");
  add_common(plt);

  CLI::App* exp = app.add_subcommand("export-model", "dump lifted matrices");
  add_common(exp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(f);
    if (des->parsed()) return cmd_design(f);
    if (ana->parsed()) return cmd_analyze(f);
    if (plt->parsed()) return cmd_plot(f);
    if (exp->parsed()) return cmd_export_model(f);
  } catch (const ConfigError& e) {
    fprintf(stderr, "mgctl: config error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    fprintf(stderr, "mgctl: numeric error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    fprintf(stderr, "mgctl: io error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fprintf(stderr, "mgctl: %s\n", e.what());
    return 1;
  }
  return 1;
}
