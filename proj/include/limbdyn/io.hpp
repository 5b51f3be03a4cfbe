#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "limbdyn/dynamics.hpp"
#include "limbdyn/energetics.hpp"
#include "limbdyn/kinematics.hpp"

namespace limbdyn {

struct TrialMeta {
  std::string subject;
  double speed_mps = 0.0;
  std::string notes;
};

struct TrialBundle {
  std::string id;
  MarkerFrameSeries markers;
  GrfSeries grf;
  std::string chain_name;
  TrialMeta meta;
};

/// Marker CSV: header `time_s,<segment>:<marker>:x_mm,...` with the y/z
/// columns following each x. Blank cells flag the marker invalid for that
/// frame. Millimeters are converted to meters on ingestion.
MarkerFrameSeries parse_markers(const std::filesystem::path& path,
                                const std::vector<std::string>& known_segments = {});
MarkerFrameSeries parse_markers_text(const std::string& text,
                                     const std::vector<std::string>& known_segments = {},
                                     const std::string& origin = "<memory>");

/// GRF CSV: header `time_s,fx_N,fy_N,fz_N,copx_m,copy_m,copz_m[,tz_Nm]`.
/// Rows with vertical force below threshold keep their COP flagged invalid;
/// negative vertical force is clamped to zero.
GrfSeries parse_grf(const std::filesystem::path& path, double contact_threshold_n);
GrfSeries parse_grf_text(const std::string& text, double contact_threshold_n,
                         const std::string& origin = "<memory>");

void write_markers(const std::filesystem::path& path, const MarkerFrameSeries& series);
void write_grf(const std::filesystem::path& path, const GrfSeries& series);

/// Everything cmd_analyze reports, in flat rows ready for deterministic
/// serialization. Column dictionaries live in docs/file_formats.md.
struct AnalysisReports {
  std::vector<std::string> joint_names;
  int grid_points = 101;
  int boundary_index = 0;       // stance -> swing transition on the percent grid
  double stance_fraction = 0.0;
  double stride_duration_s = 0.0;
  double body_mass_kg = 0.0;
  int trial_count = 0;

  struct Curve {
    std::string quantity;  // angle | moment | force | power_rot | power_trans | grf | ground_moment
    std::string joint;     // joint name, or "ground"
    std::string channel;   // axis label
    AggregateSeries series;
  };
  std::vector<Curve> curves;

  struct ExtremaRow {
    std::string quantity, joint, channel, phase;
    double max_mean = 0, max_sd = 0, max_percent = 0;
    double min_mean = 0, min_sd = 0, min_percent = 0;
  };
  std::vector<ExtremaRow> extrema_rows;

  struct EnergyRow {
    std::string variant, joint;  // variant: rotational | translational | combined
    // gen_stance, abs_stance, net_stance, gen_swing, abs_swing, net_swing
    std::array<double, 6> mean{}, sd{};
  };
  std::vector<EnergyRow> energy_rows;  // per-joint rows then a "total" row per variant

  struct FractionRow {
    std::string variant, row;  // row: joint name or "phase_share"
    std::array<std::optional<double>, 4> mean, sd;  // gen_stance, gen_swing, abs_stance, abs_swing
  };
  std::vector<FractionRow> fraction_rows;
};

/// Serialize all report tables and SVG plots into out_dir. Output is a pure
/// function of the input struct: identical inputs give byte-identical files.
void write_reports(const AnalysisReports& reports, const std::filesystem::path& out_dir);

/// Shortest round-trip decimal form (std::to_chars), locale-independent.
std::string format_double(double v);

}  // namespace limbdyn
