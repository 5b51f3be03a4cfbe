#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "limbdyn/dynamics.hpp"
#include "limbdyn/energetics.hpp"
#include "limbdyn/io.hpp"
#include "limbdyn/model.hpp"

namespace limbdyn {

/// offset + slope*t + sum of amp*sin(2*pi*freq*t + phase); derivatives in
/// closed form.
struct Harmonic {
  double amp = 0.0, freq_hz = 0.0, phase = 0.0;
};
struct Signal {
  double offset = 0.0;
  double slope = 0.0;
  std::vector<Harmonic> harmonics;
  double value(double t) const;
  double rate(double t) const;
  double accel(double t) const;
};

/// Prescribed anatomical joint angles (alpha, beta, gamma per joint) plus a
/// scripted base-point trajectory. Exact derivatives make the ground-truth
/// loads analytic up to the Newton-Euler balance itself.
struct AngleScript {
  std::vector<std::array<Signal, 3>> joint_angles;  // per joint, (alpha,beta,gamma)
  std::array<Signal, 3> base_position;              // lab, m
};

/// Prescribed joint torques for a planar chain (pin joints about lab y);
/// the trajectory is integrated forward with fixed-step RK4.
struct TorqueScript {
  std::vector<Signal> joint_torques;   // N*m about +y, per joint
  std::vector<double> initial_angles;  // rad, joint (relative) angles about +y
  std::vector<double> initial_rates;   // rad/s
};

/// Scripted ground force acting on the most distal segment.
struct GrfScript {
  double stance_begin_s = 0.0;
  double stance_end_s = 0.0;
  double peak_vertical_n = 0.0;      // half-sine-like hump peak
  double shape_power = 1.0;          // vertical shape sin(pi s)^shape_power
  double fore_aft_amp_n = 0.0;       // braking/propulsion -sin(2 pi s) amplitude
  double transverse_amp_n = 0.0;     // lateral hump amplitude
  Vec3 cop_start = Vec3::Zero();
  Vec3 cop_travel = Vec3::Zero();    // COP displacement over stance
  Vec3 force(double t) const;        // zero outside the stance window
  Vec3 cop(double t) const;
};

struct SyntheticScenario {
  LimbChain chain;
  std::optional<AngleScript> angles;
  std::optional<TorqueScript> torques;
  std::optional<GrfScript> grf;
  double duration_s = 2.0;
  double dt = 1e-4;            // integration step (torque mode)
  double marker_rate_hz = 120.0;
  double grf_rate_hz = 1000.0;
  double noise_sigma_m = 0.0;  // marker jitter, isotropic Gaussian
  std::uint64_t seed = 0;
  double gravity = kGravity;
  Vec3 base_position = Vec3(0, 0, 1.0);  // chain root when no base script
};

/// Ground truth emitted alongside the synthetic measurement streams.
struct SimulationResult {
  SegmentPoseSeries poses;        // noise-free, parent included
  CalibrationPoses calibration;
  MarkerFrameSeries markers;      // noise applied when requested
  GrfSeries grf;                  // at grf_rate
  GrfSeries grf_at_marker_times;  // exact values on the kinematic grid
  NetJointLoadSeries true_loads;
  JointPowerSeries true_powers;
  JointStateSeries true_states;
  std::vector<double> mechanical_energy;  // J, chain segments, marker times
};

SimulationResult simulate_forward(const SyntheticScenario& scenario);

struct WorkEnergyReport {
  double delta_energy = 0.0;       // J
  double total_work = 0.0;         // boundary + interior joints + ground, J
  double energy_scale = 0.0;       // peak energy excursion, J
  double residual_relative = 0.0;  // |delta - work| / scale
};

/// Energy bookkeeping over pipeline outputs: interior joint powers use the
/// relative contraction, the most proximal joint enters as boundary power
/// (absolute velocities), the ground force works at the COP material point.
WorkEnergyReport work_energy_report(const LimbChain& chain,
                                    const SegmentSpatialState& spatial,
                                    const GrfSeries& grf_aligned,
                                    const NetJointLoadSeries& loads,
                                    const JointPowerSeries& powers,
                                    double gravity = kGravity);

struct RoundtripOptions {
  double kin_cutoff_hz = 0.0;   // <= 0: unfiltered
  double grf_cutoff_hz = 0.0;
  double contact_threshold_fraction = 0.02;  // of body weight
  int edge_trim_frames = 0;     // frames dropped at both ends of the metrics
  // frames this close to a contact transition are excluded: the thresholded
  // contact flags of truth and pipeline can disagree by a frame there, which
  // swaps a full ground-force lever into the difference
  int transition_guard_frames = 5;
};

struct ChannelError {
  std::string name;
  double max_abs_error = 0.0;
  double scale = 0.0;          // max |truth| over the window
  double max_rel_error = 0.0;  // max_abs / scale (abs error when scale ~ 0)
};

struct RoundtripMetrics {
  std::vector<ChannelError> channels;
  double torque_max_rel = 0.0;
  double force_max_rel = 0.0;
  double rot_power_max_rel = 0.0;
  double trans_power_max_rel = 0.0;
  WorkEnergyReport work_energy;
};

/// Full inverse pipeline on the synthetic streams, compared channel by
/// channel against ground truth.
RoundtripMetrics roundtrip_check(const SyntheticScenario& scenario,
                                 const RoundtripOptions& options = {});
RoundtripMetrics roundtrip_check(const SyntheticScenario& scenario,
                                 const SimulationResult& sim,
                                 const RoundtripOptions& options = {});

struct TrotParams {
  double stance_fraction = 0.435;
  double stride_s = 0.706;
  double speed_mps = 3.13;
  double peak_vertical_per_kg = 9.44;  // N/kg
  double marker_rate_hz = 120.0;
  double grf_rate_hz = 1000.0;
  double noise_sigma_m = 0.0;
  std::uint64_t seed = 0;
  double contact_threshold_fraction = 0.02;  // stance window is widened so the
                                             // detected fraction matches at this threshold
};

/// Trot-like scenario on the default forelimb chain: smooth periodic joint
/// angles, forward-moving base, humped vertical ground force.
SyntheticScenario synth_trot(const TrotParams& params = {});

/// Package simulated streams as a trial (measurement side only).
TrialBundle bundle_from_simulation(const SimulationResult& sim, const std::string& id);

/// Built-in default forelimb chain (also shipped as configs/horse_forelimb.json).
const std::string& default_chain_config_text();
LimbChain default_chain();

/// Uniform-link test chain hanging from a fixed base, pin joints about +y,
/// generic (identity) sign conventions. COM at mid-length, rod inertia.
LimbChain pendulum_chain(const std::vector<double>& lengths,
                         const std::vector<double>& masses,
                         double body_mass = 1.0);

/// Scenario description document (JSON; see docs/file_formats.md).
SyntheticScenario parse_scenario(const std::string& json_text);
SyntheticScenario parse_scenario_file(const std::string& path);

}  // namespace limbdyn
