#include "limbdyn/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "limbdyn/types.hpp"

namespace limbdyn {

namespace {

std::string fixed2(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

constexpr const char* kPalette[] = {"#1f6fb4", "#d1722b", "#3d9142", "#b03a3a",
                                    "#7a5ab8", "#747474"};

}  // namespace

void write_line_chart(const std::filesystem::path& path,
                      const std::string& title,
                      const std::string& y_label,
                      const std::vector<SvgSeries>& series,
                      double boundary_percent) {
  if (series.empty()) throw InputError("svg: no series to plot");
  const double width = 640, height = 400;
  const double ml = 64, mr = 16, mt = 32, mb = 40;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double lo = 0.0, hi = 0.0;
  for (const auto& s : series)
    for (double v : s.values) { lo = std::min(lo, v); hi = std::max(hi, v); }
  if (hi - lo < 1e-12) { hi += 1.0; lo -= 1.0; }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write plot: " + path.string());

  auto xpix = [&](double pct) { return ml + pw * pct / 100.0; };
  auto ypix = [&](double v) { return mt + ph * (hi - v) / (hi - lo); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fixed2(width / 2) << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  out << "<text x=\"14\" y=\"" << fixed2(mt + ph / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
      << "transform=\"rotate(-90 14 " << fixed2(mt + ph / 2) << ")\">" << y_label
      << "</text>\n";
  out << "<text x=\"" << fixed2(ml + pw / 2) << "\" y=\"" << fixed2(height - 8)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << "percent of stride</text>\n";

  out << "<rect x=\"" << fixed2(ml) << "\" y=\"" << fixed2(mt) << "\" width=\"" << fixed2(pw)
      << "\" height=\"" << fixed2(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  if (lo < 0.0 && hi > 0.0)
    out << "<line x1=\"" << fixed2(ml) << "\" y1=\"" << fixed2(ypix(0)) << "\" x2=\""
        << fixed2(ml + pw) << "\" y2=\"" << fixed2(ypix(0))
        << "\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n";
  if (boundary_percent >= 0.0 && boundary_percent <= 100.0)
    out << "<line x1=\"" << fixed2(xpix(boundary_percent)) << "\" y1=\"" << fixed2(mt)
        << "\" x2=\"" << fixed2(xpix(boundary_percent)) << "\" y2=\"" << fixed2(mt + ph)
        << "\" stroke=\"#888\" stroke-dasharray=\"6 3\"/>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& sv = series[s].values;
    if (sv.size() < 2) continue;
    out << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 6]
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < sv.size(); ++i) {
      const double pct = 100.0 * double(i) / double(sv.size() - 1);
      if (i) out << ' ';
      out << fixed2(xpix(pct)) << ',' << fixed2(ypix(sv[i]));
    }
    out << "\"/>\n";
    out << "<text x=\"" << fixed2(ml + 8) << "\" y=\"" << fixed2(mt + 16 + 14 * double(s))
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << kPalette[s % 6]
        << "\">" << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace limbdyn
