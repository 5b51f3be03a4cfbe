#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "limbdyn/model.hpp"
#include "limbdyn/types.hpp"

namespace limbdyn {

/// Labeled marker trajectories for one tracked body.
struct SegmentMarkers {
  std::string segment;
  std::vector<std::string> labels;
  std::vector<std::vector<Vec3>> positions;  // [frame][marker], m, lab frame
  std::vector<std::vector<bool>> valid;      // [frame][marker]
};

struct MarkerFrameSeries : TimeBase {
  std::vector<SegmentMarkers> segments;
  const SegmentMarkers* find(const std::string& segment) const;
};

struct SegmentPoseSeries : TimeBase {
  std::vector<std::string> segment_names;
  std::vector<std::vector<Pose>> poses;  // [segment][frame]
  int index_of(const std::string& segment) const;  // -1 if absent
};

/// Per-joint anatomical joint coordinates with derivatives.
/// Angles are Cardan y-x-z decompositions of the calibration-relative
/// attitude with the joint's anatomical signs applied; ang_vel is the
/// relative angular velocity vector resolved in the distal segment frame
/// (same signs), which is what joint power contracts against.
struct JointState {
  std::string joint;
  std::vector<Vec3> angles;       // (alpha, beta, gamma), rad
  std::vector<Vec3> angle_rates;  // rad/s
  std::vector<Vec3> angle_accels; // rad/s^2
  std::vector<Vec3> trans;        // (x, y, z), m
  std::vector<Vec3> trans_rates;  // m/s
  std::vector<Vec3> trans_accels; // m/s^2
  std::vector<Vec3> ang_vel;      // rad/s, distal frame, anatomical signs
  std::vector<Vec3> ang_acc;      // rad/s^2
  std::vector<bool> valid;
};

struct JointStateSeries : TimeBase {
  std::vector<JointState> joints;
  const JointState& of(const std::string& joint) const;
};

struct RigidFit {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double residual_rms = 0.0;  // RMS point mismatch after transform, m
};

/// Least-squares rigid transform taking template points onto observed
/// points (SVD of the weighted cross-covariance, det-corrected).
RigidFit fit_rigid_transform(std::span<const Vec3> tmpl,
                             std::span<const Vec3> observed,
                             std::span<const double> weights = {});

/// Pose of `distal` expressed relative to `proximal`.
Pose relative_pose(const Pose& proximal, const Pose& distal);

/// Compose a body-fixed y-x-z Cardan rotation: R = Ry(beta)*Rx(alpha)*Rz(gamma).
Mat3 compose_rotation(double alpha, double beta, double gamma);

struct RotationDecomposition {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  bool singular = false;  // |alpha| was at/over the 89 deg guard
};

/// Decompose rotation relative to a calibration attitude into body-fixed
/// y-x-z Cardan angles. The reference itself decomposes to (0,0,0).
RotationDecomposition decompose_rotation(const Mat3& rotation,
                                         const Mat3& reference = Mat3::Identity());

/// Rotation-vector (helical axis * angle) form of the same relative attitude.
Vec3 rotation_vector(const Mat3& rotation, const Mat3& reference = Mat3::Identity());

/// Angular velocity (resolved in the frame the Cardan angles are measured
/// in) from y-x-z Cardan angles and their time rates.
Vec3 cardan_rates_to_angvel(const Vec3& angles, const Vec3& rates);
/// Its time derivative, given angle accelerations as well.
Vec3 cardan_rates_to_angacc(const Vec3& angles, const Vec3& rates, const Vec3& accels);

/// Zero-phase low-pass: 2nd-order Butterworth run forward and backward
/// (4th-order magnitude response). The first sample is subtracted before
/// filtering and restored after, so constants pass through bit-exactly.
/// cutoff_hz <= 0 disables filtering.
std::vector<double> low_pass_filter(std::span<const double> series,
                                    double sample_rate, double cutoff_hz);

/// Numerical time derivative on a uniform grid: 4th-order central stencils
/// in the interior with one-sided 4th-order stencils at the edges (2nd-order
/// 3-point formulas when fewer than 5 samples are available).
std::vector<double> differentiate(std::span<const double> series, double dt);

/// Fill invalid runs (interior, <= max_gap frames) by natural-cubic
/// interpolation over the valid samples; longer runs or runs touching the
/// series boundary throw NumericError.
void bridge_gaps(std::vector<double>& values, const std::vector<bool>& valid,
                 const std::vector<double>& times, int max_gap, const std::string& what);

/// Fit all chain segment poses (parent included) from marker data.
/// Frames with fewer than 3 valid markers for a segment are flagged invalid.
SegmentPoseSeries segment_poses(const LimbChain& chain, const MarkerFrameSeries& markers);

/// Single-frame poses used as the square-standing reference.
struct CalibrationPoses {
  std::vector<std::string> segment_names;  // parent first, then chain order
  std::vector<Pose> poses;
  const Pose& of(const std::string& segment) const;
};

/// Calibration in which every segment frame is lab-aligned (the identity
/// standing pose); joint angles are then measured from aligned frames.
CalibrationPoses aligned_calibration(const LimbChain& chain);
/// Calibration taken from the first frame where every segment pose is valid.
CalibrationPoses calibration_from_poses(const LimbChain& chain, const SegmentPoseSeries& poses);

/// Full joint-coordinate extraction: relative poses, Cardan decomposition,
/// gap bridging (<= max_gap frames, cubic), filtering, differentiation.
/// Disabled translations are held at zero with zero derivatives.
JointStateSeries joint_states(const LimbChain& chain,
                              const SegmentPoseSeries& poses,
                              const CalibrationPoses& calibration,
                              double filter_cutoff_hz,
                              int max_gap_frames = 5);

}  // namespace limbdyn
