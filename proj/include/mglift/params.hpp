/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_PARAMS_HPP
#define MGLIFT_PARAMS_HPP

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace mglift {

// Per-DER physical and control constants. Angular quantities in rad/s,
// impedances in SI units.
struct DerParams {
  double omega_n = 0.0;  // nominal grid frequency
  double omega_c = 0.0;  // power-filter corner frequency
  double D_P = 0.0;      // frequency droop gain (rad/s per W)
  double D_Q = 0.0;      // voltage droop gain (V per var)
  double K_pv = 0.0;     // voltage-loop proportional gain
  double K_iv = 0.0;     // voltage-loop integral gain
  double K_pc = 0.0;     // current-loop proportional gain
  double K_ic = 0.0;     // current-loop integral gain
  double F = 0.0;        // output-current feed-forward gain
  double L_f = 0.0;      // filter inductance (H)
  double r_f = 0.0;      // filter resistance (ohm)
  double C_f = 0.0;      // filter capacitance (F)
  double L_c = 0.0;      // coupling inductance (H)
  double r_c = 0.0;      // coupling resistance (ohm)
  double v_set = 0.0;    // droop voltage setpoint at rest (V)
  double S_rated = 0.0;  // VA rating (informational)
  int bus = -1;          // attachment bus (0-based)
};

struct LineParams {
  double r_line = 0.0;  // ohm
  double L_line = 0.0;  // H
  int from_bus = -1;    // current positive from from_bus to to_bus
  int to_bus = -1;
};

enum class LoadKind { Resistive, RL };

struct LoadParams {
  LoadKind kind = LoadKind::Resistive;
  double R_load = 0.0;  // ohm
  double L_load = 0.0;  // H (RL only)
  int bus = -1;
};

// Derived per-DER coefficients; a[k] holds a_{i,k} for k = 1..9 (a[0] unused).
struct DerCoeffs {
  std::array<double, 10> a{};
  double b = 0.0;
};

// Raw system description prior to validation/derivation.
struct MgDescription {
  double omega_n = 0.0;
  double r_n = 1000.0;
  std::vector<DerParams> ders;
  std::vector<LineParams> lines;
  std::vector<LoadParams> loads;
};

// Validated parameter set with derived coefficients and bus incidence.
struct MgParams {
  double omega_n = 0.0;
  double r_n = 0.0;
  std::vector<DerParams> ders;
  std::vector<LineParams> lines;
  std::vector<LoadParams> loads;
  int n_bus = 0;

  // Algebraic bus resistance r_n || (resistive loads at bus). `rho_surrogate`
  // additionally folds RL loads in as resistive, matching the reduced model.
  std::vector<double> rho;
  std::vector<double> rho_surrogate;

  // Derived coefficients a_{i,1..9}, b_i (per DER) and the line diagonal
  // damping (r_line + rho_from + rho_to)/L_line (per line).
  std::vector<DerCoeffs> coeffs;
  std::vector<double> line_a_diag;

  // Incidence: DER hosted at each bus (-1 when none); (line, sign) pairs per
  // bus with sign +1 when the line current flows into the bus; RL loads as
  // state-order positions per bus, with rl_load_ids mapping each position
  // back to its index in `loads`.
  std::vector<int> der_at_bus;
  std::vector<std::vector<std::pair<int, int>>> lines_at_bus;
  std::vector<std::vector<int>> rl_at_bus;
  std::vector<int> rl_load_ids;

  int m() const { return static_cast<int>(ders.size()); }
  int q() const { return static_cast<int>(lines.size()); }
  int p() const { return static_cast<int>(rl_load_ids.size()); }
  bool has_rl_loads() const { return !rl_load_ids.empty(); }
};

// Validates the description, infers bus incidence, and computes the derived
// coefficients. Throws ConfigError on inconsistent or non-physical input.
MgParams build_params(const MgDescription& desc);

}  // namespace mglift

#endif  // MGLIFT_PARAMS_HPP
