#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace limbdyn {

struct SvgSeries {
  std::string label;
  std::vector<double> values;  // sampled on the uniform percent grid
};

/// Minimal deterministic line chart: percent-of-stride x axis, auto-scaled
/// y axis, optional vertical phase-boundary marker. No timestamps, no
/// randomness; same inputs give identical bytes.
void write_line_chart(const std::filesystem::path& path,
                      const std::string& title,
                      const std::string& y_label,
                      const std::vector<SvgSeries>& series,
                      double boundary_percent = -1.0);

}  // namespace limbdyn
