#pragma once

// Minimal line/scatter chart writer.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace lpp::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool line = true;  // polyline, otherwise dots
};

namespace detail {
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}
inline std::string esc(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '<') out += "&lt;";
    else if (ch == '>') out += "&gt;";
    else if (ch == '&') out += "&amp;";
    else out += ch;
  }
  return out;
}
}  // namespace detail

inline void write_chart(std::ostream& os, const std::string& title, const std::vector<Series>& series,
                        const std::string& xlabel = "", const std::string& ylabel = "") {
  const double W = 640, H = 420, ml = 60, mr = 150, mt = 30, mb = 45;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) { x0 -= 1; x1 += 1; }
  if (!(y1 > y0)) { y0 -= 1; y1 += 1; }
  const double pw = W - ml - mr, ph = H - mt - mb;
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return mt + (y1 - y) / (y1 - y0) * ph; };
  using detail::num;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << detail::esc(title) << "</text>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(mt + ph + 15) << "\" text-anchor=\"middle\">"
       << num(xv) << "</text>\n";
    os << "<text x=\"" << num(ml - 5) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << num(yv)
       << "</text>\n";
  }
  if (!xlabel.empty())
    os << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(H - 8) << "\" text-anchor=\"middle\">"
       << detail::esc(xlabel) << "</text>\n";
  if (!ylabel.empty())
    os << "<text x=\"14\" y=\"" << num(mt + ph / 2) << "\" transform=\"rotate(-90 14 " << num(mt + ph / 2)
       << ")\" text-anchor=\"middle\">" << detail::esc(ylabel) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    if (s.line) {
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) os << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
      os << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        os << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"2.5\" fill=\""
           << s.color << "\"/>\n";
    }
    const double ly = mt + 10 + 16.0 * static_cast<double>(k);
    os << "<rect x=\"" << num(W - mr + 10) << "\" y=\"" << num(ly - 8) << "\" width=\"10\" height=\"10\" fill=\""
       << s.color << "\"/>\n";
    os << "<text x=\"" << num(W - mr + 25) << "\" y=\"" << num(ly + 1) << "\">" << detail::esc(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace lpp::svg
