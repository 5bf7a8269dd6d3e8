#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "stlcbf/predicate.hpp"
#include "stlcbf/sim.hpp"

namespace stlcbf {

namespace detail {

struct Box {
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();

  void add(double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  void pad(double frac) {
    if (!(x1 >= x0)) x0 = 0, x1 = 1;
    if (!(y1 >= y0)) y0 = 0, y1 = 1;
    const double dx = std::max(x1 - x0, 1e-9) * frac, dy = std::max(y1 - y0, 1e-9) * frac;
    x0 -= dx, x1 += dx, y0 -= dy, y1 += dy;
  }
};

/// Maps data coordinates into a pixel rectangle, y pointing up.
struct Frame {
  double left, top, width, height;
  Box box;
  double px(double x) const { return left + (x - box.x0) / (box.x1 - box.x0) * width; }
  double py(double y) const { return top + height - (y - box.y0) / (box.y1 - box.y0) * height; }
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string polyline(const Frame& f, const std::vector<double>& xs,
                            const std::vector<double>& ys, const char* colour,
                            const char* extra = "") {
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.2\" " << extra
     << " points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (std::isfinite(ys[i])) os << num(f.px(xs[i])) << ',' << num(f.py(ys[i])) << ' ';
  os << "\"/>\n";
  return os.str();
}

inline std::string axes(const Frame& f, const std::string& title) {
  std::ostringstream os;
  os << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.width)
     << "\" height=\"" << num(f.height) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  os << "<text x=\"" << num(f.left) << "\" y=\"" << num(f.top - 6) << "\" font-size=\"12\">"
     << title << "</text>\n";
  auto label = [&](double x, double y, const std::string& s, const char* anchor) {
    os << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"10\" text-anchor=\""
       << anchor << "\">" << s << "</text>\n";
  };
  label(f.left, f.top + f.height + 12, num(f.box.x0), "start");
  label(f.left + f.width, f.top + f.height + 12, num(f.box.x1), "end");
  label(f.left - 4, f.top + f.height, num(f.box.y0), "end");
  label(f.left - 4, f.top + 10, num(f.box.y1), "end");
  return os.str();
}

}  // namespace detail

/// Static figure: planar trajectory over the ball-shaped predicate regions,
/// plus time series of the reconstructed certificate and of e inside the
/// funnel. States with fewer than two components plot x0 against time.
inline std::string render_svg(const TrajectoryLog& log, const PredicateTable& preds) {
  using namespace detail;
  STLCBF_THROW_UNLESS(!log.rows.empty(), SpecError, "empty trajectory log");
  const bool planar = log.rows.front().x.size() >= 2;
  std::vector<double> t, px, py, hh, e, rho;
  for (const auto& r : log.rows) {
    t.push_back(r.t);
    px.push_back(planar ? r.x(0) : r.t);
    py.push_back(planar ? r.x(1) : r.x(0));
    hh.push_back(r.hhat);
    e.push_back(r.e);
    rho.push_back(r.rho);
  }

  Box plane;
  for (std::size_t i = 0; i < px.size(); ++i) plane.add(px[i], py[i]);
  std::vector<std::pair<std::string, const shape::Ball*>> balls;
  std::vector<std::string> avoided;  // regions that appear negated
  for (const auto& name : preds.names())
    if (auto* n = std::get_if<shape::Negated>(&preds.at(name).shape)) avoided.push_back(n->inner->name);
  if (planar) {
    for (const auto& name : preds.names()) {
      const auto& p = preds.at(name);
      if (auto* b = std::get_if<shape::Ball>(&p.shape); b && b->center.size() >= 2) {
        balls.push_back({name, b});
        plane.add(b->center(0) - b->radius, b->center(1) - b->radius);
        plane.add(b->center(0) + b->radius, b->center(1) + b->radius);
      }
    }
    // Equal aspect ratio.
    const double w = plane.x1 - plane.x0, h = plane.y1 - plane.y0, s = std::max(w, h);
    const double cx = 0.5 * (plane.x0 + plane.x1), cy = 0.5 * (plane.y0 + plane.y1);
    plane = {cx - s / 2, cx + s / 2, cy - s / 2, cy + s / 2};
  }
  plane.pad(0.05);

  Box hbox, ebox;
  for (std::size_t i = 0; i < t.size(); ++i) {
    hbox.add(t[i], hh[i]);
    hbox.add(t[i], 0.0);
    ebox.add(t[i], e[i]);
    ebox.add(t[i], rho[i]);
    ebox.add(t[i], 0.0);
  }
  hbox.pad(0.03);
  ebox.pad(0.03);

  const Frame fp{50, 30, 400, 400, plane};
  const Frame fh{520, 30, 420, 170, hbox};
  const Frame fe{520, 260, 420, 170, ebox};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"980\" height=\"470\" "
        "font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << axes(fp, planar ? "trajectory (x0, x1)" : "x0(t)");
  for (const auto& [name, b] : balls) {
    const double r = b->radius / (plane.x1 - plane.x0) * fp.width;
    const bool avoid = std::find(avoided.begin(), avoided.end(), name) != avoided.end();
    os << "<circle cx=\"" << num(fp.px(b->center(0))) << "\" cy=\"" << num(fp.py(b->center(1)))
       << "\" r=\"" << num(r) << "\" fill=\"" << (avoid ? "#fcae91" : "#9ecae1")
       << "\" fill-opacity=\"0.35\" stroke=\"" << (avoid ? "#de2d26" : "#3182bd") << "\"/>\n";
    os << "<text x=\"" << num(fp.px(b->center(0))) << "\" y=\"" << num(fp.py(b->center(1)))
       << "\" font-size=\"11\" text-anchor=\"middle\">" << name << "</text>\n";
  }
  os << polyline(fp, px, py, "#222");
  os << axes(fh, "reconstructed certificate hhat(t)");
  os << polyline(fh, t, std::vector<double>(t.size(), 0.0), "#999", "stroke-dasharray=\"4 3\"");
  os << polyline(fh, t, hh, "#1f77b4");
  os << axes(fe, "reconstruction error e(t) and funnel rho(t)");
  os << polyline(fe, t, rho, "#ff7f0e", "stroke-dasharray=\"5 3\"");
  os << polyline(fe, t, std::vector<double>(t.size(), 0.0), "#ff7f0e", "stroke-dasharray=\"5 3\"");
  os << polyline(fe, t, e, "#2ca02c");
  os << "</svg>\n";
  return os.str();
}

}  // namespace stlcbf
