/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mglift/errors.hpp"

namespace mglift {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;
constexpr double kMarginL = 72, kMarginR = 18, kMarginT = 40, kMarginB = 56;

std::string fmt(const char* f, double v) {
  char buf[48];
  snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void pad() {
    if (hi <= lo) { lo -= 0.5; hi += 0.5; }
    const double w = hi - lo;
    lo -= 0.05 * w;
    hi += 0.05 * w;
  }
};

// Tick spacing on the 1-2-5 ladder aiming for about `target` intervals.
std::vector<double> ticks(const Range& r, int target) {
  const double span = r.hi - r.lo;
  double raw = span / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    step = mult * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  double first = std::ceil(r.lo / step) * step;
  for (double v = first; v <= r.hi + 1e-12 * span; v += step) {
    if (std::abs(v) < 1e-12 * span) v = 0.0;  // avoid "-0"
    out.push_back(v);
  }
  return out;
}

struct Frame {
  Range xr, yr;
  double px0, px1, py0, py1;  // plot rectangle in pixels
  double sx(double x) const {
    return px0 + (x - xr.lo) / (xr.hi - xr.lo) * (px1 - px0);
  }
  double sy(double y) const {
    return py1 - (y - yr.lo) / (yr.hi - yr.lo) * (py1 - py0);
  }
};

std::string header(const PlotSpec& spec) {
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
       std::to_string(spec.width) + "\" height=\"" +
       std::to_string(spec.height) + "\" viewBox=\"0 0 " +
       std::to_string(spec.width) + " " + std::to_string(spec.height) +
       "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    s += "<text x=\"" + fmt("%.1f", spec.width / 2.0) +
         "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">" +
         escape(spec.title) + "</text>\n";
  return s;
}

std::string axes(const PlotSpec& spec, const Frame& f, bool with_x_ticks) {
  std::string s;
  s += "<rect x=\"" + fmt("%.1f", f.px0) + "\" y=\"" + fmt("%.1f", f.py0) +
       "\" width=\"" + fmt("%.1f", f.px1 - f.px0) + "\" height=\"" +
       fmt("%.1f", f.py1 - f.py0) +
       "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  if (with_x_ticks) {
    for (double v : ticks(f.xr, 6)) {
      const double x = f.sx(v);
      s += "<line x1=\"" + fmt("%.1f", x) + "\" y1=\"" + fmt("%.1f", f.py1) +
           "\" x2=\"" + fmt("%.1f", x) + "\" y2=\"" + fmt("%.1f", f.py1 + 4) +
           "\" stroke=\"black\"/>\n";
      s += "<text x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.1f", f.py1 + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           fmt("%.6g", v) + "</text>\n";
    }
  }
  for (double v : ticks(f.yr, 6)) {
    const double y = f.sy(v);
    s += "<line x1=\"" + fmt("%.1f", f.px0 - 4) + "\" y1=\"" + fmt("%.1f", y) +
         "\" x2=\"" + fmt("%.1f", f.px0) + "\" y2=\"" + fmt("%.1f", y) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fmt("%.1f", f.px0 - 8) + "\" y=\"" +
         fmt("%.1f", y + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"11\">" +
         fmt("%.6g", v) + "</text>\n";
    s += "<line x1=\"" + fmt("%.1f", f.px0) + "\" y1=\"" + fmt("%.1f", y) +
         "\" x2=\"" + fmt("%.1f", f.px1) + "\" y2=\"" + fmt("%.1f", y) +
         "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
  }
  if (!spec.x_label.empty())
    s += "<text x=\"" + fmt("%.1f", (f.px0 + f.px1) / 2) + "\" y=\"" +
         fmt("%.1f", f.py1 + 40) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">" +
         escape(spec.x_label) + "</text>\n";
  if (!spec.y_label.empty())
    s += "<text x=\"18\" y=\"" + fmt("%.1f", (f.py0 + f.py1) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 18 " +
         fmt("%.1f", (f.py0 + f.py1) / 2) + ")\">" + escape(spec.y_label) +
         "</text>\n";
  return s;
}

}  // namespace

std::string render_plot(const PlotSpec& spec,
                        const std::vector<PlotSeries>& series) {
  if (series.empty()) throw ConfigError("svg: no series to plot");
  Frame f;
  bool first = true;
  for (const PlotSeries& s : series) {
    if (s.x.size() == 0 || s.x.size() != s.y.size())
      throw ConfigError("svg: series '" + s.label + "' is empty or ragged");
    if (!s.x.allFinite() || !s.y.allFinite())
      throw ConfigError("svg: series '" + s.label + "' has non-finite values");
    if (first) {
      f.xr = {s.x.minCoeff(), s.x.maxCoeff()};
      f.yr = {s.y.minCoeff(), s.y.maxCoeff()};
      first = false;
    } else {
      f.xr.lo = std::min(f.xr.lo, s.x.minCoeff());
      f.xr.hi = std::max(f.xr.hi, s.x.maxCoeff());
      f.yr.lo = std::min(f.yr.lo, s.y.minCoeff());
      f.yr.hi = std::max(f.yr.hi, s.y.maxCoeff());
    }
  }
  f.xr.pad();
  f.yr.pad();
  f.px0 = kMarginL;
  f.px1 = spec.width - kMarginR;
  f.py0 = kMarginT;
  f.py1 = spec.height - kMarginB;

  std::string out = header(spec);
  out += axes(spec, f, true);

  int color_at = 0;
  for (const PlotSeries& s : series) {
    const std::string color =
        s.color.empty() ? kPalette[color_at % kPaletteSize] : s.color;
    ++color_at;
    if (s.line && s.x.size() > 1) {
      std::string pts;
      for (Eigen::Index i = 0; i < s.x.size(); ++i) {
        if (i) pts += ' ';
        pts += fmt("%.2f", f.sx(s.x[i])) + "," + fmt("%.2f", f.sy(s.y[i]));
      }
      out += "<polyline fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"1.4\" points=\"" + pts + "\"/>\n";
    }
    if (s.markers || s.x.size() == 1) {
      for (Eigen::Index i = 0; i < s.x.size(); ++i)
        out += "<circle cx=\"" + fmt("%.2f", f.sx(s.x[i])) + "\" cy=\"" +
               fmt("%.2f", f.sy(s.y[i])) + "\" r=\"2.4\" fill=\"" + color +
               "\"/>\n";
    }
  }

  if (spec.legend) {
    double ly = f.py0 + 14;
    int at = 0;
    for (const PlotSeries& s : series) {
      const std::string color =
          s.color.empty() ? kPalette[at % kPaletteSize] : s.color;
      ++at;
      if (s.label.empty()) continue;
      const double lx = f.px1 - 150;
      out += "<line x1=\"" + fmt("%.1f", lx) + "\" y1=\"" +
             fmt("%.1f", ly - 4) + "\" x2=\"" + fmt("%.1f", lx + 22) +
             "\" y2=\"" + fmt("%.1f", ly - 4) + "\" stroke=\"" + color +
             "\" stroke-width=\"2\"/>\n";
      out += "<text x=\"" + fmt("%.1f", lx + 28) + "\" y=\"" +
             fmt("%.1f", ly) +
             "\" font-family=\"sans-serif\" font-size=\"11\">" +
             escape(s.label) + "</text>\n";
      ly += 16;
    }
  }
  out += "</svg>\n";
  return out;
}

std::string render_bars(const PlotSpec& spec,
                        const std::vector<std::string>& labels,
                        const Eigen::VectorXd& values) {
  if (values.size() == 0) throw ConfigError("svg: no bars to plot");
  if (labels.size() != static_cast<size_t>(values.size()))
    throw ConfigError("svg: bar label/value count mismatch");
  if (!values.allFinite())
    throw ConfigError("svg: bar values are non-finite");

  Frame f;
  f.xr = {0.0, double(values.size())};
  f.yr = {std::min(0.0, values.minCoeff()), std::max(0.0, values.maxCoeff())};
  f.yr.pad();
  f.px0 = kMarginL;
  f.px1 = spec.width - kMarginR;
  f.py0 = kMarginT;
  f.py1 = spec.height - kMarginB;

  std::string out = header(spec);
  out += axes(spec, f, false);

  const double slot = (f.px1 - f.px0) / double(values.size());
  const double bw = 0.7 * slot;
  const double base = f.sy(0.0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double x = f.px0 + (double(i) + 0.15) * slot;
    const double y = f.sy(values[i]);
    out += "<rect x=\"" + fmt("%.2f", x) + "\" y=\"" +
           fmt("%.2f", std::min(y, base)) + "\" width=\"" + fmt("%.2f", bw) +
           "\" height=\"" + fmt("%.2f", std::abs(base - y)) +
           "\" fill=\"#1f77b4\"/>\n";
    const double cx = x + bw / 2;
    out += "<text x=\"" + fmt("%.1f", cx) + "\" y=\"" +
           fmt("%.1f", f.py1 + 10) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"9\" transform=\"rotate(-60 " +
           fmt("%.1f", cx) + " " + fmt("%.1f", f.py1 + 10) + ")\">" +
           escape(labels[static_cast<size_t>(i)]) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace mglift
