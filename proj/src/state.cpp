/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/state.hpp"

#include <algorithm>

namespace mglift {

namespace {

const char* const kDerSymNames[kDerStates] = {
    "delta", "P",    "Q",    "phi_d", "phi_q", "gamma_d", "gamma_q",
    "i_ld",  "i_lq", "v_od", "v_oq",  "i_od",  "i_oq",
};

}  // namespace

StateIndex::StateIndex(const MgParams& params)
    : m_(params.m()), q_(params.q()), p_(params.p()) {
  n_ = m_ * kDerStates + 2 * q_ + 2 * p_;
  names_.reserve(n_);
  for (int i = 0; i < m_; ++i)
    for (int s = 0; s < kDerStates; ++s)
      names_.push_back(std::string(kDerSymNames[s]) + "_" +
                       std::to_string(i + 1));
  for (int e = 0; e < q_; ++e) {
    names_.push_back("i_line_" + std::to_string(e + 1) + "_D");
    names_.push_back("i_line_" + std::to_string(e + 1) + "_Q");
  }
  for (int l = 0; l < p_; ++l) {
    names_.push_back("i_load_" + std::to_string(l + 1) + "_D");
    names_.push_back("i_load_" + std::to_string(l + 1) + "_Q");
  }
}

int StateIndex::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

}  // namespace mglift
