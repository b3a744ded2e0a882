/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_VERSION_HPP
#define MGLIFT_VERSION_HPP

namespace mglift {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mglift

#endif  // MGLIFT_VERSION_HPP
