/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_SVG_HPP
#define MGLIFT_SVG_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mglift {

// One plotted curve or scatter.  Rendering performs no computation on the
// values beyond the affine map to pixels: what goes in is what is drawn.
struct PlotSeries {
  std::string label;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  std::string color;     // css color; empty -> palette by position
  bool line = true;
  bool markers = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 720;
  int height = 440;
  bool legend = true;
};

// Standalone SVG document for line/scatter data.  Non-finite values or empty
// input throw ConfigError.
std::string render_plot(const PlotSpec& spec,
                        const std::vector<PlotSeries>& series);

// Vertical bar chart over categorical labels (per-state error figures).
std::string render_bars(const PlotSpec& spec,
                        const std::vector<std::string>& labels,
                        const Eigen::VectorXd& values);

}  // namespace mglift

#endif  // MGLIFT_SVG_HPP
