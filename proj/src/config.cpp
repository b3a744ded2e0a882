/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mglift/errors.hpp"

namespace mglift {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw ConfigError(origin + ": " + what);
}

double number(const json& j, const std::string& key, const std::string& at) {
  if (!j.contains(key)) fail(at, "missing '" + key + "'");
  if (!j[key].is_number()) fail(at, "'" + key + "' must be a number");
  return j[key].get<double>();
}

double number_or(const json& j, const std::string& key, double fallback,
                 const std::string& at) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) fail(at, "'" + key + "' must be a number");
  return j[key].get<double>();
}

int integer(const json& j, const std::string& key, const std::string& at) {
  if (!j.contains(key)) fail(at, "missing '" + key + "'");
  if (!j[key].is_number_integer()) fail(at, "'" + key + "' must be an integer");
  return j[key].get<int>();
}

std::vector<double> number_list(const json& j, const std::string& key,
                                const std::string& at) {
  if (!j.contains(key)) fail(at, "missing '" + key + "'");
  if (!j[key].is_array()) fail(at, "'" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : j[key]) {
    if (!v.is_number()) fail(at, "'" + key + "' entries must be numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

// Inductances accept either henries ("L") or a reactance at omega_n ("X"),
// the form the published tables use.
double inductance(const json& j, double omega_n, const std::string& at) {
  const bool has_l = j.contains("L"), has_x = j.contains("X");
  if (has_l == has_x) fail(at, "give exactly one of 'L' or 'X'");
  if (has_l) return number(j, "L", at);
  return number(j, "X", at) / omega_n;
}

DerParams parse_der(const json& j, double omega_n, const std::string& at) {
  DerParams d;
  d.omega_n = number_or(j, "omega_n", omega_n, at);
  d.omega_c = number(j, "omega_c", at);
  d.D_P = number(j, "D_P", at);
  d.D_Q = number(j, "D_Q", at);
  d.K_pv = number(j, "K_pv", at);
  d.K_iv = number(j, "K_iv", at);
  d.K_pc = number(j, "K_pc", at);
  d.K_ic = number(j, "K_ic", at);
  d.F = number(j, "F", at);
  d.L_f = number(j, "L_f", at);
  d.r_f = number(j, "r_f", at);
  d.C_f = number(j, "C_f", at);
  d.L_c = number(j, "L_c", at);
  d.r_c = number(j, "r_c", at);
  d.v_set = number(j, "v_set", at);
  d.S_rated = number_or(j, "S_rated", 0.0, at);
  d.bus = integer(j, "bus", at);
  return d;
}

num::Method parse_method(const std::string& name, const std::string& at) {
  if (name == "rk4") return num::Method::RK4;
  if (name == "rk45") return num::Method::RK45;
  if (name == "etd2") return num::Method::ETD2;
  fail(at, "unknown integrator method '" + name + "'");
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

LoadedConfig parse_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    fail(origin, std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail(origin, "top level must be an object");

  LoadedConfig cfg;
  cfg.content_hash = fnv1a(text);
  cfg.name = root.value("name", std::string("unnamed"));

  if (!root.contains("network") || !root["network"].is_object())
    fail(origin, "missing 'network' object");
  const json& net = root["network"];
  cfg.description.omega_n = number(net, "omega_n", origin + "/network");
  cfg.description.r_n = number_or(net, "r_n", 1000.0, origin + "/network");
  const double wn = cfg.description.omega_n;

  if (!root.contains("ders") || !root["ders"].is_array() ||
      root["ders"].empty())
    fail(origin, "'ders' must be a non-empty array");
  int k = 0;
  for (const auto& j : root["ders"]) {
    cfg.description.ders.push_back(
        parse_der(j, wn, origin + "/ders[" + std::to_string(k++) + "]"));
  }

  k = 0;
  for (const auto& j : root.value("lines", json::array())) {
    const std::string at = origin + "/lines[" + std::to_string(k++) + "]";
    LineParams l;
    l.r_line = number(j, "R", at);
    l.L_line = inductance(j, wn, at);
    l.from_bus = integer(j, "from", at);
    l.to_bus = integer(j, "to", at);
    cfg.description.lines.push_back(l);
  }

  k = 0;
  for (const auto& j : root.value("loads", json::array())) {
    const std::string at = origin + "/loads[" + std::to_string(k++) + "]";
    LoadParams l;
    l.R_load = number(j, "R", at);
    l.bus = integer(j, "bus", at);
    if (j.contains("L") || j.contains("X")) {
      l.kind = LoadKind::RL;
      l.L_load = inductance(j, wn, at);
    }
    cfg.description.loads.push_back(l);
  }

  if (root.contains("initial")) {
    const json& ic = root["initial"];
    const std::string at = origin + "/initial";
    if (!ic.is_object()) fail(origin, "'initial' must be an object");
    cfg.initial.v_od = number_list(ic, "v_od", at);
    cfg.initial.v_oq = number_list(ic, "v_oq", at);
    cfg.initial.i_od = number_list(ic, "i_od", at);
    cfg.initial.i_oq = number_list(ic, "i_oq", at);
    cfg.initial.i_ld = number_list(ic, "i_ld", at);
    cfg.initial.i_lq = number_list(ic, "i_lq", at);
    cfg.initial.delta = number_list(ic, "delta", at);
    cfg.initial.omega0 = number(ic, "omega0", at);
    if (ic.contains("i_line_d")) {
      cfg.initial.i_line_d = number_list(ic, "i_line_d", at);
      cfg.initial.i_line_q = number_list(ic, "i_line_q", at);
    }
    if (ic.contains("i_load_d")) {
      cfg.initial.i_load_d = number_list(ic, "i_load_d", at);
      cfg.initial.i_load_q = number_list(ic, "i_load_q", at);
    }
    cfg.has_initial = true;
  }

  if (root.contains("simulation")) {
    const json& sim = root["simulation"];
    const std::string at = origin + "/simulation";
    if (!sim.is_object()) fail(origin, "'simulation' must be an object");
    cfg.sim.t_end = number_or(sim, "t_end", cfg.sim.t_end, at);
    cfg.sim.record_stride =
        number_or(sim, "record_stride", cfg.sim.record_stride, at);
    cfg.sim.engage_time =
        number_or(sim, "engage_time", cfg.sim.engage_time, at);
    if (sim.contains("u")) cfg.sim.u = number_list(sim, "u", at);
    if (sim.contains("integrator")) {
      const json& ig = sim["integrator"];
      const std::string iat = at + "/integrator";
      if (!ig.is_object()) fail(origin, "'integrator' must be an object");
      if (ig.contains("method")) {
        if (!ig["method"].is_string()) fail(iat, "'method' must be a string");
        cfg.sim.integ.method =
            parse_method(ig["method"].get<std::string>(), iat);
      }
      cfg.sim.integ.step = number_or(ig, "step", cfg.sim.integ.step, iat);
      cfg.sim.integ.rel_tol =
          number_or(ig, "rel_tol", cfg.sim.integ.rel_tol, iat);
      cfg.sim.integ.abs_tol =
          number_or(ig, "abs_tol", cfg.sim.integ.abs_tol, iat);
      cfg.sim.integ.l_refresh =
          number_or(ig, "l_refresh", cfg.sim.integ.l_refresh, iat);
      cfg.sim.integ.warmup_time =
          number_or(ig, "warmup_time", cfg.sim.integ.warmup_time, iat);
      cfg.sim.integ.warmup_step =
          number_or(ig, "warmup_step", cfg.sim.integ.warmup_step, iat);
    }
  }
  if (cfg.sim.u.empty()) {
    for (const DerParams& d : cfg.description.ders)
      cfg.sim.u.push_back(d.v_set);
  }
  if (cfg.sim.u.size() != cfg.description.ders.size())
    fail(origin, "'simulation.u' length must match the DER count");

  return cfg;
}

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on config file: " + path);
  return parse_config(buf.str(), path);
}

}  // namespace mglift
