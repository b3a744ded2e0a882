/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_CONFIG_HPP
#define MGLIFT_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mglift/model.hpp"
#include "mglift/numerics.hpp"
#include "mglift/params.hpp"

namespace mglift {

// Simulation defaults carried by the config file; command-line flags
// override individual fields.
struct SimDefaults {
  double t_end = 5.0;
  double record_stride = 1e-3;
  double engage_time = 1.0;
  std::vector<double> u;  // physical setpoints; empty -> per-DER v_set
  num::IntegratorSpec integ;
};

// Parsed configuration file: raw system description (validate with
// build_params), the published initial operating point when present, and
// simulation defaults.
struct LoadedConfig {
  std::string name;
  MgDescription description;
  InitialSpec initial;
  bool has_initial = false;
  SimDefaults sim;
  std::uint64_t content_hash = 0;  // FNV-1a of the file bytes
};

// Parse from a JSON string; `origin` names the source in diagnostics.
// Structural or semantic problems throw ConfigError.
LoadedConfig parse_config(const std::string& text, const std::string& origin);

// Read and parse a config file; unreadable paths throw IoError.
LoadedConfig load_config(const std::string& path);

}  // namespace mglift

#endif  // MGLIFT_CONFIG_HPP
