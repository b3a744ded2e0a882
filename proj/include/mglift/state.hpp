/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_STATE_HPP
#define MGLIFT_STATE_HPP

#include <string>
#include <vector>

#include "mglift/params.hpp"

namespace mglift {

// Per-DER state symbols, in storage order.
enum DerStateSym : int {
  kDelta = 0,
  kP,
  kQ,
  kPhiD,
  kPhiQ,
  kGamD,
  kGamQ,
  kIlD,
  kIlQ,
  kVoD,
  kVoQ,
  kIoD,
  kIoQ,
};

inline constexpr int kDerStates = 13;

// Flat index map for the state vector
//   x = [x_der1 .. x_derm, x_line1 .. x_lineq, x_rl1 .. x_rlp],
// with each DER block ordered per DerStateSym and each line/RL block (D, Q).
class StateIndex {
 public:
  explicit StateIndex(const MgParams& params);

  int n() const { return n_; }
  int m() const { return m_; }
  int q() const { return q_; }
  int p() const { return p_; }

  int der(int i) const { return i * kDerStates; }
  int der(int i, DerStateSym sym) const { return i * kDerStates + sym; }
  int line(int e) const { return m_ * kDerStates + 2 * e; }
  int rl(int l) const { return m_ * kDerStates + 2 * q_ + 2 * l; }

  const std::vector<std::string>& names() const { return names_; }
  // Flat position of a named state, or -1 when absent.
  int find(const std::string& name) const;

 private:
  int m_ = 0, q_ = 0, p_ = 0, n_ = 0;
  std::vector<std::string> names_;
};

}  // namespace mglift

#endif  // MGLIFT_STATE_HPP
