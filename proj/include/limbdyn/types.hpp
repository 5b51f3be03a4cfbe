#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace limbdyn {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kGravity = 9.81;  // m/s^2, lab +z up

/// Input/config problems: bad files, bad schemas, inconsistent series.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failures: divergent integration, degenerate geometry mid-run.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rigid transform mapping a segment frame into the lab frame:
/// p_lab = rotation * p_seg + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double residual_rms = 0.0;  // RMS marker mismatch of the fit, m
  bool valid = true;
};

/// Uniform-rate scalar/vector sample series share this time base.
struct TimeBase {
  double sample_rate = 0.0;  // Hz
  std::vector<double> times; // s, strictly increasing, uniform spacing
};

inline double time_step(const TimeBase& tb) {
  if (tb.times.size() < 2) throw InputError("time base needs at least 2 samples");
  return (tb.times.back() - tb.times.front()) / double(tb.times.size() - 1);
}

}  // namespace limbdyn
