#include "traj/eval/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "traj/error.hpp"

namespace traj::eval {

namespace {

const char* const kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(double w, double h, const std::string& title) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(w / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
  return o.str();
}

struct Box {
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x, lo_y = lo_x, hi_y = -lo_x;

  void add(double x, double y) {
    lo_x = std::min(lo_x, x), hi_x = std::max(hi_x, x);
    lo_y = std::min(lo_y, y), hi_y = std::max(hi_y, y);
  }
  // Maps into [margin, size - margin], flipping y.
  std::pair<double, double> map(double x, double y, double size, double margin) const {
    const double sx = hi_x > lo_x ? (x - lo_x) / (hi_x - lo_x) : 0.5;
    const double sy = hi_y > lo_y ? (y - lo_y) / (hi_y - lo_y) : 0.5;
    return {margin + sx * (size - 2 * margin), size - margin - sy * (size - 2 * margin)};
  }
};

}  // namespace

std::string heatmap_csv(const DistanceMatrix& m) {
  std::ostringstream o;
  o.precision(17);
  o << "group";
  for (const auto& l : m.labels) o << ",L" << l.level << "_r" << l.replicate;
  o << '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    o << 'L' << m.labels[i].level << "_r" << m.labels[i].replicate;
    for (std::size_t j = 0; j < m.labels.size(); ++j) o << ',' << m.values(i, j);
    o << '\n';
  }
  return o.str();
}

std::string heatmap_svg(const DistanceMatrix& m, const std::string& title) {
  const std::size_t n = m.labels.size();
  const double cell = 36.0, left = 70.0, top = 40.0;
  const double w = left + cell * static_cast<double>(n) + 20.0, h = top + cell * static_cast<double>(n) + 30.0;
  double hi = 0.0;
  for (double v : m.values.data()) hi = std::max(hi, v);
  std::ostringstream o;
  o << header(w, h, title);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = "L" + std::to_string(m.labels[i].level) + "r" + std::to_string(m.labels[i].replicate);
    o << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(top + cell * (static_cast<double>(i) + 0.6))
      << "\" text-anchor=\"end\">" << name << "</text>\n";
    o << "<text x=\"" << fmt(left + cell * (static_cast<double>(i) + 0.5)) << "\" y=\""
      << fmt(top + cell * static_cast<double>(n) + 14) << "\" text-anchor=\"middle\">" << name << "</text>\n";
    for (std::size_t j = 0; j < n; ++j) {
      const double v = m.values(i, j), s = hi > 0.0 ? v / hi : 0.0;
      // White (0) to dark blue (max).
      const int r = static_cast<int>(std::lround(255 * (1 - 0.85 * s))), g = static_cast<int>(std::lround(255 * (1 - 0.6 * s)));
      char color[16];
      std::snprintf(color, sizeof color, "#%02x%02xff", r, g);
      o << "<rect x=\"" << fmt(left + cell * static_cast<double>(j)) << "\" y=\"" << fmt(top + cell * static_cast<double>(i))
        << "\" width=\"" << fmt(cell) << "\" height=\"" << fmt(cell) << "\" fill=\"" << color
        << "\" stroke=\"white\"><title>" << fmt(v) << "</title></rect>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string scatter_svg(const num::Tensor& points, const std::vector<int>& labels, const std::string& title) {
  if (points.rows() != labels.size() || (points.rows() > 0 && points.cols() < 2)) {
    throw DimensionError("scatter_svg: need n x 2 points and one label per point");
  }
  const double size = 420.0, margin = 40.0;
  Box box;
  for (std::size_t r = 0; r < points.rows(); ++r) box.add(points(r, 0), points(r, 1));
  std::map<int, std::size_t> color;
  for (int l : labels) color.emplace(l, color.size());
  std::ostringstream o;
  o << header(size, size, title);
  for (std::size_t r = 0; r < points.rows(); ++r) {
    const auto [x, y] = box.map(points(r, 0), points(r, 1), size, margin);
    o << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"3\" fill=\""
      << kPalette[color[labels[r]] % std::size(kPalette)] << "\"/>\n";
  }
  double ly = 34.0;
  for (const auto& [label, c] : color) {
    o << "<circle cx=\"" << fmt(size - 70) << "\" cy=\"" << fmt(ly) << "\" r=\"4\" fill=\""
      << kPalette[c % std::size(kPalette)] << "\"/><text x=\"" << fmt(size - 60) << "\" y=\"" << fmt(ly + 4)
      << "\">level " << label << "</text>\n";
    ly += 16.0;
  }
  o << "</svg>\n";
  return o.str();
}

std::string perturb_traces_csv(const std::vector<PerturbRecord>& records) {
  std::ostringstream o;
  o.precision(17);
  o << "delta,rollout,t,x,y\n";
  for (const auto& rec : records) {
    for (std::size_t r = 0; r < rec.traces.size(); ++r) {
      for (std::size_t t = 0; t < rec.traces[r].size(); ++t) {
        o << rec.delta << ',' << r << ',' << t << ',' << rec.traces[r][t].first << ',' << rec.traces[r][t].second
          << '\n';
      }
    }
  }
  return o.str();
}

std::string perturb_traces_svg(const std::vector<PerturbRecord>& records, const std::string& title) {
  const double size = 420.0, margin = 40.0;
  Box box;
  for (const auto& rec : records) {
    for (const auto& trace : rec.traces) {
      for (const auto& [x, y] : trace) box.add(x, y);
    }
  }
  std::ostringstream o;
  o << header(size, size, title);
  double ly = 34.0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const char* c = kPalette[k % std::size(kPalette)];
    for (const auto& trace : records[k].traces) {
      o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t t = 0; t < trace.size(); ++t) {
        const auto [x, y] = box.map(trace[t].first, trace[t].second, size, margin);
        o << (t ? " " : "") << fmt(x) << ',' << fmt(y);
      }
      o << "\"/>\n";
    }
    o << "<line x1=\"" << fmt(size - 90) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(size - 74) << "\" y2=\""
      << fmt(ly) << "\" stroke=\"" << c << "\" stroke-width=\"2\"/><text x=\"" << fmt(size - 70) << "\" y=\""
      << fmt(ly + 4) << "\">delta " << fmt(records[k].delta) << "</text>\n";
    ly += 16.0;
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace traj::eval
