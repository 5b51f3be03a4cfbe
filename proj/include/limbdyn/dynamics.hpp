#pragma once

#include <optional>
#include <string>
#include <vector>

#include "limbdyn/kinematics.hpp"
#include "limbdyn/model.hpp"
#include "limbdyn/types.hpp"

namespace limbdyn {

/// Force-plate record. Lab frame: x forward, y left-lateral, z vertical up.
/// cop_valid marks frames where vertical force exceeded the contact
/// threshold and the center of pressure is therefore trustworthy; the
/// recursion applies the ground force only on those frames.
struct GrfSeries : TimeBase {
  std::vector<Vec3> force;        // N
  std::vector<Vec3> cop;          // m
  std::vector<double> free_moment; // N*m about vertical, zero when absent
  std::vector<bool> cop_valid;
  std::vector<std::string> warnings;  // ingestion notes (clamped rows etc.)
};

struct SegmentState {
  std::string segment;
  std::vector<Mat3> rotation;   // lab <- segment
  std::vector<Vec3> origin;     // proximal joint center, lab, m
  std::vector<Vec3> com_pos;    // m
  std::vector<Vec3> com_vel;    // m/s
  std::vector<Vec3> com_acc;    // m/s^2
  std::vector<Vec3> ang_vel;    // rad/s, lab
  std::vector<Vec3> ang_acc;    // rad/s^2, lab
};

struct SegmentSpatialState : TimeBase {
  std::vector<SegmentState> segments;  // chain order, parent excluded
};

/// Per-joint net loads. Anatomical components live in the distal segment
/// frame with the joint's sign convention applied; lab copies back the
/// balance checks. Forces are what the proximal side applies to the
/// distal segment.
struct JointLoad {
  std::string joint;
  std::vector<Vec3> moment;        // N*m, anatomical
  std::vector<Vec3> force;         // N, anatomical
  std::vector<Vec3> moment_per_kg; // N*m/kg
  std::vector<Vec3> force_per_kg;  // N/kg
  std::vector<Vec3> moment_lab;    // N*m, lab frame
  std::vector<Vec3> force_lab;     // N, lab frame
};

struct NetJointLoadSeries : TimeBase {
  std::vector<JointLoad> joints;
  const JointLoad& of(const std::string& joint) const;
};

struct PhaseEvents {
  double stride_begin = 0.0;
  double stride_end = 0.0;
  double stance_begin = 0.0;
  double stance_end = 0.0;
  double stance_fraction = 0.0;  // of stride duration
};

/// COM and angular kinematics of every chain segment from its pose series.
/// Pose components are low-pass filtered at filter_cutoff_hz (<= 0 skips),
/// angular velocity comes from the skew part of Rdot * R^T.
SegmentSpatialState segment_spatial_states(const LimbChain& chain,
                                           const SegmentPoseSeries& poses,
                                           double filter_cutoff_hz);

/// Ground force resampled onto kinematic timestamps: forces are low-pass
/// filtered at grf_cutoff_hz then linearly interpolated; COP only where
/// vertical force clears contact_threshold_n.
GrfSeries resample_grf(const GrfSeries& grf, std::span<const double> target_times,
                       double grf_cutoff_hz, double contact_threshold_n);

/// Distal-to-proximal Newton-Euler recursion. grf must be aligned to the
/// kinematic time base (resample_grf); the ground force acts on the most
/// distal segment at the COP.
NetJointLoadSeries inverse_dynamics(const LimbChain& chain,
                                    const SegmentSpatialState& spatial,
                                    const GrfSeries& grf,
                                    double gravity = kGravity);

/// Single contact episode from the vertical force channel.
/// Throws InputError when no contact or more than one episode is found.
PhaseEvents detect_stance(const GrfSeries& grf, double threshold_n);

/// Max-norm residual of the whole-chain force balance
/// sum(m_i a_i) = GRF + sum(m_i g) + F_boundary, relative to the largest
/// term. Re-derives everything from stored outputs.
double whole_chain_balance_residual(const LimbChain& chain,
                                    const SegmentSpatialState& spatial,
                                    const GrfSeries& grf,
                                    const NetJointLoadSeries& loads,
                                    double gravity = kGravity);

/// Moment of the ground force about the most distal joint center, lab
/// frame. Diagnostic channel accompanying the joint moments.
std::vector<Vec3> grf_ground_moment(const LimbChain& chain,
                                    const SegmentSpatialState& spatial,
                                    const GrfSeries& grf);

}  // namespace limbdyn
