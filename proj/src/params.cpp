/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/params.hpp"

#include <algorithm>
#include <cmath>

#include "mglift/errors.hpp"

namespace mglift {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void require_positive(double v, const std::string& what) {
  require(std::isfinite(v) && v > 0.0, "non-positive constant: " + what);
}

}  // namespace

MgParams build_params(const MgDescription& desc) {
  require(!desc.ders.empty(), "config lists no DERs");
  require_positive(desc.omega_n, "omega_n");
  require_positive(desc.r_n, "r_n");

  MgParams p;
  p.omega_n = desc.omega_n;
  p.r_n = desc.r_n;
  p.ders = desc.ders;
  p.lines = desc.lines;
  p.loads = desc.loads;

  const int m = p.m();
  const int q = p.q();

  int n_bus = 0;
  auto touch_bus = [&](int bus, const std::string& where) {
    require(bus >= 0, "negative bus id in " + where);
    n_bus = std::max(n_bus, bus + 1);
  };

  for (int i = 0; i < m; ++i) {
    DerParams& d = p.ders[i];
    const std::string tag = "der " + std::to_string(i + 1);
    touch_bus(d.bus, tag);
    if (d.omega_n == 0.0) d.omega_n = desc.omega_n;
    require(d.omega_n == desc.omega_n, tag + ": omega_n differs from network");
    require_positive(d.omega_c, tag + ".omega_c");
    require(d.D_P >= 0.0 && d.D_Q >= 0.0, tag + ": negative droop gain");
    require_positive(d.K_pv, tag + ".K_pv");
    require_positive(d.K_iv, tag + ".K_iv");
    require_positive(d.K_pc, tag + ".K_pc");
    require_positive(d.K_ic, tag + ".K_ic");
    require(d.F >= 0.0, tag + ": negative feed-forward gain");
    require_positive(d.L_f, tag + ".L_f");
    require_positive(d.r_f, tag + ".r_f");
    require_positive(d.C_f, tag + ".C_f");
    require_positive(d.L_c, tag + ".L_c");
    require_positive(d.r_c, tag + ".r_c");
    require_positive(d.v_set, tag + ".v_set");
  }
  for (int e = 0; e < q; ++e) {
    const LineParams& l = p.lines[e];
    const std::string tag = "line " + std::to_string(e + 1);
    touch_bus(l.from_bus, tag);
    touch_bus(l.to_bus, tag);
    require(l.from_bus != l.to_bus, tag + ": from_bus equals to_bus");
    require_positive(l.L_line, tag + ".L_line");
    require(l.r_line >= 0.0, tag + ": negative r_line");
  }
  for (size_t k = 0; k < p.loads.size(); ++k) {
    const LoadParams& l = p.loads[k];
    const std::string tag = "load " + std::to_string(k + 1);
    touch_bus(l.bus, tag);
    require_positive(l.R_load, tag + ".R_load");
    if (l.kind == LoadKind::RL) require_positive(l.L_load, tag + ".L_load");
  }

  p.n_bus = n_bus;
  p.der_at_bus.assign(n_bus, -1);
  p.lines_at_bus.assign(n_bus, {});
  p.rl_at_bus.assign(n_bus, {});

  for (int i = 0; i < m; ++i) {
    require(p.der_at_bus[p.ders[i].bus] < 0,
            "bus " + std::to_string(p.ders[i].bus + 1) + " hosts more than one DER");
    p.der_at_bus[p.ders[i].bus] = i;
  }
  for (int e = 0; e < q; ++e) {
    p.lines_at_bus[p.lines[e].from_bus].push_back({e, -1});
    p.lines_at_bus[p.lines[e].to_bus].push_back({e, +1});
  }
  for (size_t k = 0; k < p.loads.size(); ++k) {
    if (p.loads[k].kind == LoadKind::RL) {
      p.rl_at_bus[p.loads[k].bus].push_back(
          static_cast<int>(p.rl_load_ids.size()));
      p.rl_load_ids.push_back(static_cast<int>(k));
    }
  }

  // Every inferred bus must be referenced by something.
  for (int b = 0; b < n_bus; ++b) {
    bool used = p.der_at_bus[b] >= 0 || !p.lines_at_bus[b].empty();
    for (const auto& l : p.loads) used = used || l.bus == b;
    require(used, "dangling bus reference: bus " + std::to_string(b + 1) +
                      " is attached to nothing");
  }

  // Bus shunt resistance: r_n in parallel with the resistive loads. The
  // surrogate variant folds RL loads in as resistive too.
  p.rho.assign(n_bus, 0.0);
  p.rho_surrogate.assign(n_bus, 0.0);
  for (int b = 0; b < n_bus; ++b) {
    double g_full = 1.0 / p.r_n;
    double g_surr = 1.0 / p.r_n;
    for (const auto& l : p.loads) {
      if (l.bus != b) continue;
      if (l.kind == LoadKind::Resistive) g_full += 1.0 / l.R_load;
      g_surr += 1.0 / l.R_load;
    }
    p.rho[b] = 1.0 / g_full;
    p.rho_surrogate[b] = 1.0 / g_surr;
  }

  p.coeffs.resize(m);
  for (int i = 0; i < m; ++i) {
    const DerParams& d = p.ders[i];
    const double rho = p.rho_surrogate[d.bus];
    DerCoeffs& c = p.coeffs[i];
    c.a[1] = d.K_pc * d.K_pv * d.D_Q / d.L_f;
    c.a[2] = d.K_pc * d.K_iv / d.L_f;
    c.a[3] = d.K_ic / d.L_f;
    c.a[4] = (d.r_f + d.K_pc) / d.L_f;
    c.a[5] = (1.0 + d.K_pc * d.K_pv) / d.L_f;
    c.a[6] = d.K_pc * p.omega_n * d.C_f / d.L_f;
    c.a[7] = d.K_pc * d.F / d.L_f;
    c.a[8] = (d.r_c + rho) / d.L_c;
    c.a[9] = rho / d.L_c;
    c.b = d.K_pc * d.K_pv / d.L_f;
  }

  p.line_a_diag.resize(q);
  for (int e = 0; e < q; ++e) {
    const LineParams& l = p.lines[e];
    p.line_a_diag[e] =
        (l.r_line + p.rho_surrogate[l.from_bus] + p.rho_surrogate[l.to_bus]) /
        l.L_line;
  }

  return p;
}

}  // namespace mglift
