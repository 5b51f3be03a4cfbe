#include "limbdyn/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "limbdyn/svg.hpp"

namespace limbdyn {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_number(std::string_view s, const std::string& origin, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw InputError(origin + ":" + std::to_string(line_no) + ": not a number: '" +
                     std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_uniform_times(const std::vector<double>& times, const std::string& origin) {
  if (times.size() < 2) return;
  const double dt = (times.back() - times.front()) / double(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double step = times[i] - times[i - 1];
    if (!(step > 0.0))
      throw InputError(origin + ":" + std::to_string(i + 2) +
                       ": timestamps must be strictly increasing");
    if (std::abs(step - dt) > 1e-9)
      throw InputError(origin + ": non-uniform sampling (step " + format_double(step) +
                       " vs mean " + format_double(dt) + ")");
  }
}

}  // namespace

MarkerFrameSeries parse_markers_text(const std::string& text,
                                     const std::vector<std::string>& known_segments,
                                     const std::string& origin) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw InputError(origin + ": empty file");
  const auto header = split_csv(lines[0]);
  if (header.empty() || header[0] != "time_s")
    throw InputError(origin + ": header must start with time_s");
  if ((header.size() - 1) % 3 != 0)
    throw InputError(origin + ": marker columns must come in x/y/z triples");

  MarkerFrameSeries out;
  struct Column {
    std::size_t segment_index;
    std::size_t marker_index;
    int axis;
  };
  std::vector<Column> columns;
  const char* axis_suffix[3] = {":x_mm", ":y_mm", ":z_mm"};

  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string col(header[c]);
    const int axis = int((c - 1) % 3);
    const std::string suffix = axis_suffix[axis];
    if (col.size() <= suffix.size() || col.substr(col.size() - suffix.size()) != suffix)
      throw InputError(origin + ": malformed header column '" + col + "' (expected *" +
                       suffix + ")");
    const std::string body = col.substr(0, col.size() - suffix.size());
    const std::size_t sep = body.find(':');
    if (sep == std::string::npos || sep == 0 || sep + 1 >= body.size())
      throw InputError(origin + ": malformed header column '" + col +
                       "' (expected segment:marker:axis_mm)");
    const std::string segment = body.substr(0, sep);
    const std::string marker = body.substr(sep + 1);
    if (!known_segments.empty() &&
        std::find(known_segments.begin(), known_segments.end(), segment) ==
            known_segments.end())
      throw InputError(origin + ": unknown segment label '" + segment + "'");

    std::size_t si = out.segments.size();
    for (std::size_t i = 0; i < out.segments.size(); ++i)
      if (out.segments[i].segment == segment) { si = i; break; }
    if (si == out.segments.size()) {
      out.segments.push_back(SegmentMarkers{segment, {}, {}, {}});
    }
    auto& sm = out.segments[si];
    std::size_t mi = sm.labels.size();
    for (std::size_t i = 0; i < sm.labels.size(); ++i)
      if (sm.labels[i] == marker) { mi = i; break; }
    if (mi == sm.labels.size()) {
      if (axis != 0)
        throw InputError(origin + ": column '" + col + "' starts a marker on a non-x axis");
      sm.labels.push_back(marker);
    }
    columns.push_back({si, mi, axis});
  }

  const std::size_t n_rows = lines.size() - 1;
  if (n_rows == 0) throw InputError(origin + ": no data rows");
  for (auto& sm : out.segments) {
    sm.positions.assign(n_rows, std::vector<Vec3>(sm.labels.size(), Vec3::Zero()));
    sm.valid.assign(n_rows, std::vector<bool>(sm.labels.size(), true));
  }

  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t line_no = r + 2;
    const auto cells = split_csv(lines[r + 1]);
    if (cells.size() != header.size())
      throw InputError(origin + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    const double t = parse_number(cells[0], origin, line_no);
    if (!out.times.empty()) {
      if (t == out.times.back())
        throw InputError(origin + ":" + std::to_string(line_no) + ": duplicated timestamp " +
                         format_double(t));
      if (t < out.times.back())
        throw InputError(origin + ":" + std::to_string(line_no) + ": non-monotonic timestamp");
    }
    out.times.push_back(t);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& col = columns[c];
      auto& sm = out.segments[col.segment_index];
      std::string_view cell = cells[c + 1];
      if (cell.empty()) {
        sm.valid[r][col.marker_index] = false;
        continue;
      }
      sm.positions[r][col.marker_index][col.axis] =
          parse_number(cell, origin, line_no) / 1000.0;  // mm -> m
    }
  }

  check_uniform_times(out.times, origin);
  out.sample_rate = out.times.size() > 1
                        ? double(out.times.size() - 1) / (out.times.back() - out.times.front())
                        : 0.0;
  return out;
}

MarkerFrameSeries parse_markers(const std::filesystem::path& path,
                                const std::vector<std::string>& known_segments) {
  return parse_markers_text(read_file(path), known_segments, path.string());
}

GrfSeries parse_grf_text(const std::string& text, double contact_threshold_n,
                         const std::string& origin) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw InputError(origin + ": empty file");
  const auto header = split_csv(lines[0]);
  const std::vector<std::string> base = {"time_s", "fx_N",   "fy_N",   "fz_N",
                                         "copx_m", "copy_m", "copz_m"};
  const bool has_tz = header.size() == 8;
  if (header.size() != 7 && !has_tz)
    throw InputError(origin + ": expected 7 or 8 columns");
  for (std::size_t i = 0; i < base.size(); ++i)
    if (header[i] != base[i])
      throw InputError(origin + ": header column " + std::to_string(i + 1) + " must be " +
                       base[i]);
  if (has_tz && header[7] != "tz_Nm")
    throw InputError(origin + ": trailing column must be tz_Nm");

  GrfSeries out;
  if (lines.size() < 2) throw InputError(origin + ": no data rows");
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::size_t line_no = r + 1;
    const auto cells = split_csv(lines[r]);
    if (cells.size() != header.size())
      throw InputError(origin + ":" + std::to_string(line_no) + ": wrong cell count");
    const double t = parse_number(cells[0], origin, line_no);
    if (!out.times.empty() && t <= out.times.back())
      throw InputError(origin + ":" + std::to_string(line_no) + ": non-monotonic timestamp");
    out.times.push_back(t);
    Vec3 f(parse_number(cells[1], origin, line_no), parse_number(cells[2], origin, line_no),
           parse_number(cells[3], origin, line_no));
    if (f.z() < 0.0) {
      out.warnings.push_back(origin + ":" + std::to_string(line_no) +
                             ": negative vertical force clamped to zero");
      f.z() = 0.0;
    }
    out.force.push_back(f);
    out.cop.push_back(Vec3(parse_number(cells[4], origin, line_no),
                           parse_number(cells[5], origin, line_no),
                           parse_number(cells[6], origin, line_no)));
    out.free_moment.push_back(has_tz ? parse_number(cells[7], origin, line_no) : 0.0);
    out.cop_valid.push_back(f.z() > contact_threshold_n);
  }
  check_uniform_times(out.times, origin);
  out.sample_rate = out.times.size() > 1
                        ? double(out.times.size() - 1) / (out.times.back() - out.times.front())
                        : 0.0;
  return out;
}

GrfSeries parse_grf(const std::filesystem::path& path, double contact_threshold_n) {
  return parse_grf_text(read_file(path), contact_threshold_n, path.string());
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  return out;
}

}  // namespace

void write_markers(const std::filesystem::path& path, const MarkerFrameSeries& series) {
  auto out = open_out(path);
  out << "time_s";
  for (const auto& sm : series.segments)
    for (const auto& label : sm.labels)
      out << ',' << sm.segment << ':' << label << ":x_mm"
          << ',' << sm.segment << ':' << label << ":y_mm"
          << ',' << sm.segment << ':' << label << ":z_mm";
  out << '\n';
  for (std::size_t r = 0; r < series.times.size(); ++r) {
    out << format_double(series.times[r]);
    for (const auto& sm : series.segments)
      for (std::size_t m = 0; m < sm.labels.size(); ++m)
        for (int k = 0; k < 3; ++k) {
          out << ',';
          if (sm.valid[r][m]) out << format_double(sm.positions[r][m][k] * 1000.0);
        }
    out << '\n';
  }
}

void write_grf(const std::filesystem::path& path, const GrfSeries& series) {
  auto out = open_out(path);
  out << "time_s,fx_N,fy_N,fz_N,copx_m,copy_m,copz_m,tz_Nm\n";
  for (std::size_t r = 0; r < series.times.size(); ++r) {
    out << format_double(series.times[r]);
    for (int k = 0; k < 3; ++k) out << ',' << format_double(series.force[r][k]);
    for (int k = 0; k < 3; ++k) out << ',' << format_double(series.cop[r][k]);
    out << ',' << format_double(series.free_moment.empty() ? 0.0 : series.free_moment[r]);
    out << '\n';
  }
}

namespace {

std::string opt_pct(const std::optional<double>& v) {
  return v ? format_double(*v * 100.0) : std::string("n/a");
}

}  // namespace

void write_reports(const AnalysisReports& reports, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw InputError("cannot create output directory: " + out_dir.string());

  {
    auto out = open_out(out_dir / "stride.csv");
    out << "key,value\n";
    out << "stance_fraction," << format_double(reports.stance_fraction) << '\n';
    out << "stride_duration_s," << format_double(reports.stride_duration_s) << '\n';
    out << "body_mass_kg," << format_double(reports.body_mass_kg) << '\n';
    out << "trial_count," << reports.trial_count << '\n';
    out << "grid_points," << reports.grid_points << '\n';
    out << "stance_end_index," << reports.boundary_index << '\n';
  }

  {
    auto out = open_out(out_dir / "curves.csv");
    out << "quantity,joint,channel,percent,mean,sd\n";
    for (const auto& c : reports.curves) {
      const std::size_t n = c.series.mean.size();
      for (std::size_t i = 0; i < n; ++i) {
        const double pct = 100.0 * double(i) / double(n - 1);
        out << c.quantity << ',' << c.joint << ',' << c.channel << ','
            << format_double(pct) << ',' << format_double(c.series.mean[i]) << ','
            << format_double(c.series.sd[i]) << '\n';
      }
    }
  }

  {
    auto out = open_out(out_dir / "extrema.csv");
    out << "quantity,joint,channel,phase,max,max_sd,max_pct_of_phase,"
           "min,min_sd,min_pct_of_phase\n";
    for (const auto& r : reports.extrema_rows) {
      out << r.quantity << ',' << r.joint << ',' << r.channel << ',' << r.phase << ','
          << format_double(r.max_mean) << ',' << format_double(r.max_sd) << ','
          << format_double(r.max_percent) << ',' << format_double(r.min_mean) << ','
          << format_double(r.min_sd) << ',' << format_double(r.min_percent) << '\n';
    }
  }

  {
    auto out = open_out(out_dir / "energy.csv");
    out << "variant,joint,gen_stance,abs_stance,net_stance,gen_swing,abs_swing,net_swing,"
           "gen_stance_sd,abs_stance_sd,net_stance_sd,gen_swing_sd,abs_swing_sd,net_swing_sd\n";
    for (const auto& r : reports.energy_rows) {
      out << r.variant << ',' << r.joint;
      for (double v : r.mean) out << ',' << format_double(v);
      for (double v : r.sd) out << ',' << format_double(v);
      out << '\n';
    }
  }

  {
    auto out = open_out(out_dir / "energy_fractions.csv");
    out << "variant,row,gen_stance_pct,gen_stance_sd,gen_swing_pct,gen_swing_sd,"
           "abs_stance_pct,abs_stance_sd,abs_swing_pct,abs_swing_sd\n";
    for (const auto& r : reports.fraction_rows) {
      out << r.variant << ',' << r.row;
      for (int k = 0; k < 4; ++k)
        out << ',' << opt_pct(r.mean[std::size_t(k)]) << ',' << opt_pct(r.sd[std::size_t(k)]);
      out << '\n';
    }
  }

  // one chart per joint and quantity, plus the ground force
  const double boundary_pct =
      100.0 * double(reports.boundary_index) / double(reports.grid_points - 1);
  auto plot_quantity = [&](const std::string& quantity, const std::string& unit) {
    for (const auto& joint : reports.joint_names) {
      std::vector<SvgSeries> series;
      for (const auto& c : reports.curves)
        if (c.quantity == quantity && c.joint == joint)
          series.push_back(SvgSeries{c.channel, c.series.mean});
      if (series.empty()) continue;
      write_line_chart(out_dir / "plots" / (quantity + "_" + joint + ".svg"),
                       joint + " " + quantity, unit, series, boundary_pct);
    }
  };
  plot_quantity("moment", "N*m/kg");
  plot_quantity("force", "N/kg");
  plot_quantity("power_rot", "W/kg");
  plot_quantity("power_trans", "W/kg");
  {
    std::vector<SvgSeries> series;
    for (const auto& c : reports.curves)
      if (c.quantity == "grf")
        series.push_back(SvgSeries{c.channel, c.series.mean});
    if (!series.empty())
      write_line_chart(out_dir / "plots" / "grf.svg", "ground reaction force", "N/kg",
                       series, boundary_pct);
  }
}

}  // namespace limbdyn
