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

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "mglift/config.hpp"
#include "mglift/csv.hpp"
#include "mglift/errors.hpp"
#include "mglift/svg.hpp"
#include "testutil.hpp"

using namespace mglift;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

const char* kConfig = MGLIFT_TEST_CONFIG;
const char* kBin = MGCTL_BIN;

// Everything a child writes must be reproducible; pin the manifest clock.
const char* kEpoch = "SOURCE_DATE_EPOCH=1755216000";

int run_tool(const std::string& args) {
  const std::string cmd = std::string(kEpoch) + " " + kBin + " " + args +
                          " >/dev/null 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::path("cli_test_out") / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

}  // namespace

TEST_CASE("bundled config reproduces the in-tree test system") {
  LoadedConfig cfg = load_config(kConfig);
  CHECK(cfg.name == "ieee-3der-testsystem");
  const MgDescription ref = testutil::test_system();
  CHECK(cfg.description.omega_n == ref.omega_n);
  CHECK(cfg.description.r_n == ref.r_n);
  REQUIRE(cfg.description.ders.size() == 3);
  for (int i = 0; i < 3; ++i) {
    const DerParams& a = cfg.description.ders[static_cast<size_t>(i)];
    const DerParams& b = ref.ders[static_cast<size_t>(i)];
    CHECK(a.omega_n == b.omega_n);
    CHECK(a.omega_c == b.omega_c);
    CHECK(a.D_P == b.D_P);
    CHECK(a.D_Q == b.D_Q);
    CHECK(a.K_pv == b.K_pv);
    CHECK(a.K_iv == b.K_iv);
    CHECK(a.K_pc == b.K_pc);
    CHECK(a.K_ic == b.K_ic);
    CHECK(a.F == b.F);
    CHECK(a.L_f == b.L_f);
    CHECK(a.r_f == b.r_f);
    CHECK(a.C_f == b.C_f);
    CHECK(a.L_c == b.L_c);
    CHECK(a.r_c == b.r_c);
    CHECK(a.v_set == b.v_set);
    CHECK(a.bus == b.bus);
  }
  REQUIRE(cfg.description.lines.size() == 2);
  for (int e = 0; e < 2; ++e) {
    CHECK(cfg.description.lines[static_cast<size_t>(e)].r_line ==
          ref.lines[static_cast<size_t>(e)].r_line);
    CHECK(cfg.description.lines[static_cast<size_t>(e)].L_line ==
          ref.lines[static_cast<size_t>(e)].L_line);
  }
  REQUIRE(cfg.description.loads.size() == 2);
  CHECK(cfg.description.loads[0].R_load == 25.0);
  CHECK(cfg.description.loads[1].R_load == 20.0);
  CHECK(cfg.description.loads[1].bus == 2);

  REQUIRE(cfg.has_initial);
  const InitialSpec ref_ic = testutil::test_initial();
  CHECK(cfg.initial.v_od == ref_ic.v_od);
  CHECK(cfg.initial.v_oq == ref_ic.v_oq);
  CHECK(cfg.initial.i_od == ref_ic.i_od);
  CHECK(cfg.initial.i_oq == ref_ic.i_oq);
  CHECK(cfg.initial.i_ld == ref_ic.i_ld);
  CHECK(cfg.initial.i_lq == ref_ic.i_lq);
  CHECK(cfg.initial.delta == ref_ic.delta);
  CHECK(cfg.initial.omega0 == ref_ic.omega0);
  CHECK(cfg.initial.i_line_d == ref_ic.i_line_d);
  CHECK(cfg.initial.i_line_q == ref_ic.i_line_q);

  CHECK(cfg.sim.t_end == 5.0);
  CHECK(cfg.sim.engage_time == 1.0);
  CHECK(cfg.sim.u == std::vector<double>{380.0, 380.0, 380.0});
  CHECK(cfg.sim.integ.method == num::Method::ETD2);
  CHECK(cfg.sim.integ.step == 2e-5);

  // the parsed description must pass validation and give the known sizes
  const MgParams params = build_params(cfg.description);
  CHECK(params.m() == 3);
  CHECK(params.q() == 2);
  CHECK(params.p() == 0);
}

TEST_CASE("config parsing rejects malformed input") {
  CHECK_THROWS_AS(parse_config("not json", "t"), ConfigError);
  CHECK_THROWS_AS(parse_config("[]", "t"), ConfigError);
  CHECK_THROWS_AS(parse_config("{}", "t"), ConfigError);
  CHECK_THROWS_AS(
      parse_config(R"({"network":{"omega_n":314},"ders":[]})", "t"),
      ConfigError);
  // both L and X on a line
  const std::string both = R"({
    "network": {"omega_n": 314.0},
    "ders": [{"bus":0,"omega_c":31.41,"D_P":9.4e-5,"D_Q":1.3e-3,"K_pv":0.05,
              "K_iv":390,"K_pc":10.5,"K_ic":16000,"F":0.75,"L_f":1.35e-3,
              "r_f":0.1,"C_f":5e-5,"L_c":3.5e-4,"r_c":0.03,"v_set":380}],
    "lines": [{"from":0,"to":0,"R":0.1,"L":1e-3,"X":0.1}]
  })";
  CHECK_THROWS_AS(parse_config(both, "t"), ConfigError);
  // setpoint list of the wrong length
  const std::string badu = R"({
    "network": {"omega_n": 314.0},
    "ders": [{"bus":0,"omega_c":31.41,"D_P":9.4e-5,"D_Q":1.3e-3,"K_pv":0.05,
              "K_iv":390,"K_pc":10.5,"K_ic":16000,"F":0.75,"L_f":1.35e-3,
              "r_f":0.1,"C_f":5e-5,"L_c":3.5e-4,"r_c":0.03,"v_set":380}],
    "simulation": {"u": [380.0, 380.0]}
  })";
  CHECK_THROWS_AS(parse_config(badu, "t"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("csv writing round-trips bit-exactly") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  CsvTable t;
  t.header = {"alpha", "beta", "gamma"};
  t.data.resize(40, 3);
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 3; ++c) t.data(r, c) = d(gen) * std::pow(10.0, c - 8);
  t.data(0, 0) = 0.0;
  t.data(1, 1) = -0.0;
  t.data(2, 2) = 1e-300;

  const std::string text = csv_string(t);
  CsvTable back = parse_csv(text, "mem");
  REQUIRE(back.header == t.header);
  REQUIRE(back.rows() == t.rows());
  for (int r = 0; r < t.rows(); ++r)
    for (int c = 0; c < 3; ++c) {
      CHECK(back.data(r, c) == t.data(r, c));
    }
  CHECK(back.column("beta") == 1);
  CHECK_THROWS_AS(back.column("nope"), ConfigError);

  // metadata comment lines are skipped
  CsvTable commented = parse_csv("# manifest=abc\n" + text, "mem");
  CHECK(commented.rows() == t.rows());

  CHECK_THROWS_AS(parse_csv("", "m"), ConfigError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n", "m"), ConfigError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n", "m"), ConfigError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,zzz\n", "m"), ConfigError);
  CsvTable badh;
  badh.header = {"with,comma"};
  badh.data.resize(1, 1);
  CHECK_THROWS_AS(csv_string(badh), ConfigError);
}

TEST_CASE("svg rendering is structurally sound and strict") {
  PlotSpec spec;
  spec.title = "probe & title";
  spec.x_label = "t";
  spec.y_label = "v";
  PlotSeries s;
  s.label = "one";
  s.x = VectorXd::LinSpaced(50, 0.0, 5.0);
  s.y = s.x.array().sin();
  const std::string svg = render_plot(spec, {s});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("probe &amp; title") != std::string::npos);

  PlotSeries bad = s;
  bad.y[10] = std::nan("");
  CHECK_THROWS_AS(render_plot(spec, {bad}), ConfigError);
  CHECK_THROWS_AS(render_plot(spec, {}), ConfigError);
  PlotSeries ragged = s;
  ragged.y = VectorXd::Zero(3);
  CHECK_THROWS_AS(render_plot(spec, {ragged}), ConfigError);

  const std::string bars =
      render_bars(spec, {"a", "b", "c"}, Eigen::Vector3d(1.0, -0.5, 2.0));
  CHECK(bars.find("<rect") != std::string::npos);
  CHECK_THROWS_AS(render_bars(spec, {"a"}, Eigen::Vector3d(1, 2, 3)),
                  ConfigError);
}

TEST_CASE("simulate pair writes referenced artifacts deterministically") {
  const fs::path out1 = fresh_dir("pair1");
  const fs::path out2 = fresh_dir("pair2");
  const std::string base = std::string("simulate --config ") + kConfig +
                           " --scenario pair --out ";
  REQUIRE(run_tool(base + out1.string()) == 0);
  REQUIRE(run_tool(base + out2.string()) == 0);

  for (const char* name : {"manifest.json", "physical.csv", "lifted.csv"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(out1 / name));
    CHECK(slurp(out1 / name) == slurp(out2 / name));
  }

  // the data files reference the manifest run id
  const std::string manifest = slurp(out1 / "manifest.json");
  const size_t at = manifest.find("\"run_id\": \"");
  REQUIRE(at != std::string::npos);
  const std::string run_id = manifest.substr(at + 11, 16);
  const std::string head = slurp(out1 / "physical.csv").substr(0, 64);
  CHECK(head.find("# manifest=" + run_id) == 0);

  // recorded columns: t + 43 states + 3 setpoints
  CsvTable t = read_csv((out1 / "physical.csv").string());
  CHECK(t.header.size() == 47);
  CHECK(t.rows() == 5001);
  CHECK(t.data(0, t.column("t")) == 0.0);
  CHECK(t.data(t.rows() - 1, t.column("t")) == 5.0);
  CHECK(t.data(0, t.column("v_od_1")) == 380.8);
}

TEST_CASE("analyze and plot consume the pair artifacts") {
  const fs::path out = fresh_dir("pipeline");
  const std::string cfg = std::string(" --config ") + kConfig;
  REQUIRE(run_tool("simulate" + cfg + " --scenario pair --out " +
                   out.string()) == 0);
  REQUIRE(run_tool("analyze" + cfg + " --out " + out.string()) == 0);
  REQUIRE(fs::exists(out / "mae.csv"));
  REQUIRE(fs::exists(out / "breakdown.csv"));
  REQUIRE(fs::exists(out / "summary.txt"));

  CsvTable mt = read_csv((out / "mae.csv").string());
  const VectorXd mae = mt.data.col(mt.column("mae"));
  CHECK(mae[0] == 0.0);
  CHECK(mae.maxCoeff() == doctest::Approx(1.381).epsilon(0.02));
  CHECK(mae[mae.size() - 1] == doctest::Approx(0.2118).epsilon(0.02));
  const VectorXd maen = mt.data.col(mt.column("mae_normalized"));
  CHECK(maen.maxCoeff() < mae.maxCoeff());

  CsvTable bt = read_csv((out / "breakdown.csv").string());
  CHECK(bt.rows() == 43);

  REQUIRE(run_tool("plot" + cfg + " --out " + out.string()) == 0);
  for (const char* name : {"voltages.svg", "mae.svg", "errors.svg"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(out / name));
    const std::string svg = slurp(out / name);
    CHECK(svg.rfind("<!-- manifest=", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
  }
}

TEST_CASE("closed loop run restores the output voltages") {
  const fs::path out = fresh_dir("closed");
  const std::string cfg = std::string(" --config ") + kConfig;
  REQUIRE(run_tool("simulate" + cfg + " --scenario closed_loop --out " +
                   out.string()) == 0);
  REQUIRE(fs::exists(out / "controller.json"));

  CsvTable t = read_csv((out / "trajectory.csv").string());
  const VectorXd ts = t.data.col(t.column("t"));
  // pre-engagement droop offsets are visibly nonzero, post-settle gone
  double pre = 0.0, post = 0.0;
  for (int k = 0; k < t.rows(); ++k) {
    double worst = 0.0;
    for (int i = 1; i <= 3; ++i)
      worst = std::max(worst,
                       std::abs(t.data(k, t.column("v_od_" +
                                                   std::to_string(i))) -
                                380.0));
    if (ts[k] < 1.0 && ts[k] > 0.5) pre = std::max(pre, worst);
    if (ts[k] >= 4.0) post = std::max(post, worst);
  }
  CHECK(pre > 0.1);
  CHECK(post < 1e-3);

  REQUIRE(run_tool("analyze" + cfg + " --out " + out.string()) == 0);
  const std::string summary = slurp(out / "summary.txt");
  CHECK(summary.find("voltage tracking") != std::string::npos);
  CHECK(summary.find("pole comparison") != std::string::npos);
}

TEST_CASE("design writes the gain and a sign-correct pole table") {
  const fs::path out = fresh_dir("design");
  REQUIRE(run_tool(std::string("design --config ") + kConfig + " --out " +
                   out.string()) == 0);
  REQUIRE(fs::exists(out / "controller.json"));
  REQUIRE(fs::exists(out / "poles.csv"));
  CHECK(slurp(out / "controller.json").find("\"manifest\"") !=
        std::string::npos);

  CsvTable t = read_csv((out / "poles.csv").string());
  CHECK(t.rows() == 70 + 73);
  int n_closed = 0;
  double worst_closed = -1e300, worst_open = -1e300;
  for (int r = 0; r < t.rows(); ++r) {
    if (t.data(r, t.column("closed_loop")) > 0.5) {
      ++n_closed;
      worst_closed = std::max(worst_closed, t.data(r, t.column("re")));
    } else {
      worst_open = std::max(worst_open, t.data(r, t.column("re")));
    }
  }
  CHECK(n_closed == 73);
  CHECK(worst_closed < 0.0);
  CHECK(std::abs(worst_open) <= 1e-8);

  REQUIRE(run_tool(std::string("plot --config ") + kConfig + " --out " +
                   out.string()) == 0);
  CHECK(fs::exists(out / "poles.svg"));
}

TEST_CASE("batch simulate summarizes every run and reruns identically") {
  const fs::path out1 = fresh_dir("batch1");
  const fs::path out2 = fresh_dir("batch2");
  const std::string base = std::string("simulate --config ") + kConfig +
                           " --scenario batch --runs 3 --seed 5 --out ";
  REQUIRE(run_tool(base + out1.string()) == 0);
  REQUIRE(run_tool(base + out2.string()) == 0);
  CHECK(slurp(out1 / "batch_summary.csv") == slurp(out2 / "batch_summary.csv"));
  CHECK(slurp(out1 / "batch_mae.csv") == slurp(out2 / "batch_mae.csv"));

  CsvTable t = read_csv((out1 / "batch_summary.csv").string());
  CHECK(t.rows() == 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(t.data(r, t.column("diverged_physical")) == 0.0);
    CHECK(t.data(r, t.column("mae_final")) ==
          doctest::Approx(0.2118).epsilon(0.02));
  }
  CsvTable curves = read_csv((out1 / "batch_mae.csv").string());
  CHECK(curves.header.size() == 4);
  CHECK(curves.rows() == 5001);

  REQUIRE(run_tool(std::string("plot --config ") + kConfig + " --out " +
                   out1.string()) == 0);
  CHECK(fs::exists(out1 / "mae.svg"));
}

TEST_CASE("failures map to the documented exit codes") {
  CHECK(run_tool("simulate --config /nonexistent.json --out cli_test_out/x") ==
        4);
  CHECK(run_tool(std::string("simulate --config ") + kConfig +
                 " --scenario bogus --out cli_test_out/x") == 2);
  CHECK(run_tool(std::string("analyze --config ") + kConfig +
                 " --out cli_test_out/definitely_empty_dir") == 4);
  CHECK(run_tool("") == 1);

  const fs::path wdir = fresh_dir("weights");
  write_text_file((wdir / "bad.json").string(), "{\"control\": -1.0}\n");
  CHECK(run_tool(std::string("design --config ") + kConfig + " --weights " +
                 (wdir / "bad.json").string() + " --out " + wdir.string()) ==
        2);

  // an empty data file is an io failure, not a parse failure
  const fs::path edir = fresh_dir("emptytraj");
  write_text_file((edir / "trajectory.csv").string(), "t,v_od_1\n");
  CHECK(run_tool(std::string("plot --config ") + kConfig + " --out " +
                 edir.string()) == 4);
}
