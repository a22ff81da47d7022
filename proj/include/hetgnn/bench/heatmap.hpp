#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "hetgnn/matrix.hpp"

namespace hetgnn::bench {

/// Row-major CSV with 6 decimals.
inline std::string cm_csv(const Matrix& m) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.6f", m(i, j));
      if (j) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

namespace detail {

// Linear white -> dark blue ramp over [0, 1].
inline std::string heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const auto mix = [v](int lo, int hi) { return static_cast<int>(lo + (hi - lo) * v + 0.5); };
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(255, 8), mix(255, 48), mix(255, 107));
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Standalone SVG heatmap; cells are annotated when K <= 12.
inline std::string cm_svg(const Matrix& m, const std::string& title) {
  const int cell = 48, margin = 40, top = 36;
  const int w = margin + cell * static_cast<int>(m.cols()) + 10;
  const int h = top + margin + cell * static_cast<int>(m.rows()) + 10;
  const bool annotate = m.rows() <= 12 && m.cols() <= 12;
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n", w, h,
                w, h);
  s += buf;
  s += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  s += "<text x=\"" + std::to_string(margin) + "\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\">" +
       detail::escape_xml(title) + "</text>\n";
  for (std::size_t j = 0; j < m.cols(); ++j) {
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">%zu</text>\n",
                  margin + cell * static_cast<int>(j) + cell / 2, top + margin - 8, j);
    s += buf;
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const int y = top + margin + cell * static_cast<int>(i);
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">%zu</text>\n",
                  margin - 6, y + cell / 2 + 4, i);
    s += buf;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const int x = margin + cell * static_cast<int>(j);
      const double v = m(i, j);
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\" stroke=\"#999999\" stroke-width=\"0.5\"/>\n",
                    x, y, cell, cell, detail::heat_color(v).c_str());
      s += buf;
      if (annotate) {
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
                      "fill=\"%s\">%.3f</text>\n",
                      x + cell / 2, y + cell / 2 + 4, v > 0.5 ? "#ffffff" : "#000000", v);
        s += buf;
      }
    }
  }
  s += "</svg>\n";
  return s;
}

}  // namespace hetgnn::bench
