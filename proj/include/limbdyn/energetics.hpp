#pragma once

#include <optional>
#include <string>
#include <vector>

#include "limbdyn/dynamics.hpp"
#include "limbdyn/types.hpp"

namespace limbdyn {

/// Per-axis joint powers. Rotational components are moment * angular
/// velocity per anatomical axis (add/abd, flex/ext, int/ext); total is the
/// full vector contraction M.w + F.v, which the per-axis rotational terms
/// sum to exactly.
struct JointPower {
  std::string joint;
  std::vector<Vec3> rotational;         // W
  std::vector<Vec3> translational;      // W
  std::vector<double> total;            // W
  std::vector<Vec3> rotational_per_kg;  // W/kg
  std::vector<Vec3> translational_per_kg;
  std::vector<double> total_per_kg;
};

struct JointPowerSeries : TimeBase {
  std::vector<JointPower> joints;
  const JointPower& of(const std::string& joint) const;
};

struct PhaseEnergy {
  double generated = 0.0;  // J/kg, >= 0
  double absorbed = 0.0;   // J/kg, <= 0
  double net = 0.0;        // J/kg
};

struct JointEnergy {
  std::string joint;
  PhaseEnergy stance, swing;
};

struct EnergyTable {
  std::vector<JointEnergy> joints;
  PhaseEnergy stance_total, swing_total;
};

/// Rotations-only, translations-only, and combined variants. Each variant
/// sums its power channels within a joint before the generated/absorbed
/// split; the per-axis split is retained alongside.
struct EnergySummary {
  EnergyTable rotational, translational, combined;
  // per joint (combined.joints order), channels: rot x,y,z then trans x,y,z
  std::vector<std::array<PhaseEnergy, 6>> per_axis;
};

/// Percentage shares; unset entries mean the category total was zero.
struct FractionTable {
  std::vector<std::string> joints;
  std::vector<std::optional<double>> gen_stance, gen_swing;  // share of the phase total, 0..1
  std::vector<std::optional<double>> abs_stance, abs_swing;
  std::optional<double> gen_stance_phase, gen_swing_phase;   // phase share of stride total
  std::optional<double> abs_stance_phase, abs_swing_phase;
};

struct FractionTables {
  FractionTable rotational, translational, combined;
};

struct NormalizedSeries {
  std::vector<double> values;  // on the uniform 0..100% grid
  int boundary_index = 0;      // stance/swing transition grid index
};

struct ExtremaResult {
  double max_value = 0.0, min_value = 0.0;
  double max_percent = 0.0, min_percent = 0.0;  // % of the phase window
  int max_index = 0, min_index = 0;
};

struct AggregateSeries {
  std::vector<double> mean, sd;
  bool single_trial = false;  // n == 1, sd forced to zero
};

struct ScalarStats {
  double mean = 0.0, sd = 0.0;
  bool single_trial = false;
};

/// Per-axis joint powers from aligned load and state series.
/// Disabled translations contribute identically zero power.
JointPowerSeries joint_power(const LimbChain& chain,
                             const NetJointLoadSeries& loads,
                             const JointStateSeries& states);

/// Trapezoidal integration of positive and negative power separately per
/// phase, on the original timestamps. Energies are per kg.
EnergySummary integrate_energy(const JointPowerSeries& power,
                               const PhaseEvents& phases);

FractionTable energy_fractions(const EnergyTable& table);
FractionTables energy_fractions(const EnergySummary& summary);

/// Natural cubic spline resampling onto a uniform percent grid.
/// Endpoint samples are preserved exactly.
NormalizedSeries time_normalize(std::span<const double> values,
                                std::span<const double> times,
                                int n_points = 101,
                                std::optional<double> boundary_time = {});

AggregateSeries aggregate(const std::vector<NormalizedSeries>& trials);
ScalarStats aggregate(std::span<const double> values);

/// Extrema over grid window [begin_index, end_index]; ties break earliest.
ExtremaResult extrema(const NormalizedSeries& series, int begin_index, int end_index);

}  // namespace limbdyn
