#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "skelsim/errors.hpp"
#include "skelsim/report.hpp"

namespace skelsim {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

// header row plus records, CRLF line ends
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != header.size()) throw Error("csv row width does not match the header");
    rows.push_back(std::move(row));
  }

  std::string str() const {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_field(r[i]);
      os << "\r\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return os.str();
  }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
  if (!out) throw Error("write failed for " + path);
}

inline CsvTable report_table(const std::vector<RunReport>& rs) {
  CsvTable t;
  t.header = {"check", "estimate", "se", "oracle", "z", "rule", "threshold", "verdict", "note", "meta"};
  for (const auto& r : rs) {
    std::string meta;
    for (const auto& [k, v] : r.meta) meta += (meta.empty() ? "" : ";") + k + "=" + v;
    t.add({r.check, format_double(r.estimate), format_double(r.se), format_double(r.oracle), format_double(r.z),
           to_string(r.rule), format_double(r.threshold), r.pass ? "pass" : "fail", r.note, meta});
  }
  return t;
}

// line plot of y against x with a +-2 SE band
inline std::string svg_band_plot(const std::string& title, const std::vector<double>& x, const std::vector<double>& y,
                                 const std::vector<double>& se, const std::string& xlabel = "t") {
  const double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  double x0 = x.empty() ? 0 : *std::min_element(x.begin(), x.end());
  double x1 = x.empty() ? 1 : *std::max_element(x.begin(), x.end());
  double y0 = INFINITY, y1 = -INFINITY;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double s = i < se.size() && std::isfinite(se[i]) ? 2.0 * se[i] : 0.0;
    y0 = std::min(y0, y[i] - s);
    y1 = std::max(y1, y[i] + s);
  }
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (W + L - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel
     << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">" << xv
       << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 3 << "\" text-anchor=\"end\" font-size=\"10\">" << yv
       << "</text>\n";
  }
  if (!se.empty()) {
    os << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) os << px(x[i]) << "," << py(y[i] + 2 * se[i]) << " ";
    for (std::size_t i = x.size(); i-- > 0;) os << px(x[i]) << "," << py(y[i] - 2 * se[i]) << " ";
    os << "\"/>\n";
  }
  os << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) os << px(x[i]) << "," << py(y[i]) << " ";
  os << "\"/>\n</svg>\n";
  return os.str();
}

}  // namespace skelsim
