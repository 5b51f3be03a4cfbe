#include "limbdyn/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "limbdyn/spline.hpp"

namespace limbdyn {

namespace {
constexpr double kSingularGuardDeg = 89.0;
}

const SegmentMarkers* MarkerFrameSeries::find(const std::string& segment) const {
  for (const auto& s : segments)
    if (s.segment == segment) return &s;
  return nullptr;
}

int SegmentPoseSeries::index_of(const std::string& segment) const {
  for (std::size_t i = 0; i < segment_names.size(); ++i)
    if (segment_names[i] == segment) return int(i);
  return -1;
}

const JointState& JointStateSeries::of(const std::string& joint) const {
  for (const auto& j : joints)
    if (j.joint == joint) return j;
  throw InputError("unknown joint in state series: " + joint);
}

const Pose& CalibrationPoses::of(const std::string& segment) const {
  for (std::size_t i = 0; i < segment_names.size(); ++i)
    if (segment_names[i] == segment) return poses[i];
  throw InputError("no calibration pose for segment: " + segment);
}

RigidFit fit_rigid_transform(std::span<const Vec3> tmpl,
                             std::span<const Vec3> observed,
                             std::span<const double> weights) {
  if (tmpl.size() != observed.size())
    throw InputError("rigid fit: point counts differ");
  if (tmpl.size() < 3)
    throw InputError("rigid fit: needs at least 3 point pairs");
  const std::size_t n = tmpl.size();
  std::vector<double> w(n, 1.0);
  if (!weights.empty()) {
    if (weights.size() != n) throw InputError("rigid fit: weight count mismatch");
    w.assign(weights.begin(), weights.end());
  }
  double wsum = 0.0;
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    wsum += w[i];
    ca += w[i] * tmpl[i];
    cb += w[i] * observed[i];
  }
  if (!(wsum > 0.0)) throw InputError("rigid fit: weights sum to zero");
  ca /= wsum;
  cb /= wsum;

  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i)
    h += w[i] * (observed[i] - cb) * (tmpl[i] - ca).transpose();

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(1) < 1e-12 * std::max(1.0, svd.singularValues()(0)))
    throw InputError("rigid fit: degenerate (collinear) point configuration");
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  RigidFit fit;
  fit.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  fit.translation = cb - fit.rotation * ca;

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    ss += w[i] * (fit.rotation * tmpl[i] + fit.translation - observed[i]).squaredNorm();
  fit.residual_rms = std::sqrt(ss / wsum);
  return fit;
}

Pose relative_pose(const Pose& proximal, const Pose& distal) {
  Pose rel;
  rel.rotation = proximal.rotation.transpose() * distal.rotation;
  rel.translation = proximal.rotation.transpose() * (distal.translation - proximal.translation);
  rel.valid = proximal.valid && distal.valid;
  return rel;
}

Mat3 compose_rotation(double alpha, double beta, double gamma) {
  return (Eigen::AngleAxisd(beta, Vec3::UnitY()) *
          Eigen::AngleAxisd(alpha, Vec3::UnitX()) *
          Eigen::AngleAxisd(gamma, Vec3::UnitZ()))
      .toRotationMatrix();
}

RotationDecomposition decompose_rotation(const Mat3& rotation, const Mat3& reference) {
  const Mat3 m = rotation * reference.transpose();
  RotationDecomposition d;
  const double s = std::clamp(-m(1, 2), -1.0, 1.0);
  d.alpha = std::asin(s);
  d.singular = std::abs(d.alpha) > kSingularGuardDeg * std::numbers::pi / 180.0;
  if (d.singular) {
    // beta and gamma are not separable here; report the coupled angle as beta
    d.beta = std::atan2(m(0, 1) * (s > 0 ? 1.0 : -1.0), m(0, 0));
    d.gamma = 0.0;
    return d;
  }
  d.beta = std::atan2(m(0, 2), m(2, 2));
  d.gamma = std::atan2(m(1, 0), m(1, 1));
  return d;
}

Vec3 rotation_vector(const Mat3& rotation, const Mat3& reference) {
  Eigen::AngleAxisd aa(Mat3(rotation * reference.transpose()));
  return aa.angle() * aa.axis();
}

Vec3 cardan_rates_to_angvel(const Vec3& angles, const Vec3& rates) {
  const double ca = std::cos(angles[0]), sa = std::sin(angles[0]);
  const double cb = std::cos(angles[1]), sb = std::sin(angles[1]);
  // w = bdot*y + adot*Ry(b)*x + gdot*Ry(b)*Rx(a)*z, in the proximal frame
  const Vec3 u(cb, 0.0, -sb);            // Ry(b)*x
  const Vec3 v(sb * ca, -sa, cb * ca);   // Ry(b)*Rx(a)*z
  return rates[1] * Vec3::UnitY() + rates[0] * u + rates[2] * v;
}

Vec3 cardan_rates_to_angacc(const Vec3& angles, const Vec3& rates, const Vec3& accels) {
  const double ca = std::cos(angles[0]), sa = std::sin(angles[0]);
  const double cb = std::cos(angles[1]), sb = std::sin(angles[1]);
  const Vec3 u(cb, 0.0, -sb);
  const Vec3 du_db(-sb, 0.0, -cb);
  const Vec3 v(sb * ca, -sa, cb * ca);
  const Vec3 dv_db(cb * ca, 0.0, -sb * ca);
  const Vec3 dv_da(-sb * sa, -ca, -cb * sa);
  return accels[1] * Vec3::UnitY() + accels[0] * u + rates[0] * du_db * rates[1] +
         accels[2] * v + rates[2] * (dv_db * rates[1] + dv_da * rates[0]);
}

std::vector<double> low_pass_filter(std::span<const double> series,
                                    double sample_rate, double cutoff_hz) {
  std::vector<double> out(series.begin(), series.end());
  if (cutoff_hz <= 0.0 || series.size() < 3) return out;
  if (!(sample_rate > 0.0)) throw InputError("filter: sample rate must be positive");
  if (cutoff_hz >= 0.5 * sample_rate)
    throw InputError("filter: cutoff must be below the Nyquist frequency");

  // RBJ biquad, Butterworth Q, unity DC gain.
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_rate;
  const double alpha = std::sin(w0) / std::sqrt(2.0);
  const double a0 = 1.0 + alpha;
  const double b0 = (1.0 - std::cos(w0)) / 2.0 / a0;
  const double b1 = (1.0 - std::cos(w0)) / a0;
  const double b2 = b0;
  const double a1 = -2.0 * std::cos(w0) / a0;
  const double a2 = (1.0 - alpha) / a0;

  // anchor on the first sample so a constant series passes through bit-exactly
  const std::size_t n = series.size();
  const double anchor = series[0];

  const std::size_t pad = std::min(n - 1, std::size_t(std::ceil(2.0 * sample_rate / cutoff_hz)));
  std::vector<double> x(n + 2 * pad);
  for (std::size_t i = 0; i < n; ++i) x[pad + i] = series[i] - anchor;
  for (std::size_t i = 0; i < pad; ++i) {
    x[pad - 1 - i] = -x[pad + 1 + i];                  // odd reflection about both ends
    x[pad + n + i] = -x[pad + n - 2 - i];
  }

  auto pass = [&](std::vector<double>& v) {
    double s1 = 0.0, s2 = 0.0;  // direct form II transposed
    for (double& vi : v) {
      const double in = vi;
      const double y = b0 * in + s1;
      s1 = b1 * in - a1 * y + s2;
      s2 = b2 * in - a2 * y;
      vi = y;
    }
  };
  pass(x);
  std::reverse(x.begin(), x.end());
  pass(x);
  std::reverse(x.begin(), x.end());

  for (std::size_t i = 0; i < n; ++i) out[i] = x[pad + i] + anchor;
  return out;
}

std::vector<double> differentiate(std::span<const double> series, double dt) {
  const std::size_t n = series.size();
  if (n < 3) throw InputError("differentiate: needs at least 3 samples");
  if (!(dt > 0.0)) throw InputError("differentiate: dt must be positive");
  std::vector<double> d(n);
  const auto& f = series;
  if (n < 5) {
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dt);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt);
    return d;
  }
  d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * dt);
  d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * dt);
  for (std::size_t i = 2; i + 2 < n; ++i)
    d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * dt);
  d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) /
             (12.0 * dt);
  d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] +
              3.0 * f[n - 5]) /
             (12.0 * dt);
  return d;
}

SegmentPoseSeries segment_poses(const LimbChain& chain, const MarkerFrameSeries& markers) {
  SegmentPoseSeries out;
  out.sample_rate = markers.sample_rate;
  out.times = markers.times;
  const std::size_t n_frames = markers.times.size();

  auto fit_segment = [&](const std::string& name,
                         const std::vector<MarkerTemplatePoint>& tmpl) {
    const SegmentMarkers* sm = markers.find(name);
    if (!sm) throw InputError("no markers recorded for segment: " + name);
    std::vector<Pose> poses(n_frames);
    for (std::size_t fidx = 0; fidx < n_frames; ++fidx) {
      std::vector<Vec3> ref, obs;
      for (std::size_t m = 0; m < sm->labels.size(); ++m) {
        if (!sm->valid[fidx][m]) continue;
        auto it = std::find_if(tmpl.begin(), tmpl.end(), [&](const MarkerTemplatePoint& p) {
          return p.label == sm->labels[m];
        });
        if (it == tmpl.end()) continue;
        ref.push_back(it->position);
        obs.push_back(sm->positions[fidx][m]);
      }
      if (ref.size() < 3) {
        poses[fidx].valid = false;
        continue;
      }
      RigidFit fit = fit_rigid_transform(ref, obs);
      poses[fidx].rotation = fit.rotation;
      poses[fidx].translation = fit.translation;
      poses[fidx].residual_rms = fit.residual_rms;
      poses[fidx].valid = true;
    }
    out.segment_names.push_back(name);
    out.poses.push_back(std::move(poses));
  };

  fit_segment(chain.parent.name, chain.parent.marker_template);
  for (const auto& seg : chain.segments) fit_segment(seg.name, seg.marker_template);
  return out;
}

CalibrationPoses aligned_calibration(const LimbChain& chain) {
  CalibrationPoses cal;
  Pose parent;
  parent.translation = -chain.parent.socket_offset;
  cal.segment_names.push_back(chain.parent.name);
  cal.poses.push_back(parent);
  Vec3 origin = Vec3::Zero();
  for (const auto& seg : chain.segments) {
    Pose p;
    p.translation = origin;
    cal.segment_names.push_back(seg.name);
    cal.poses.push_back(p);
    origin += Vec3(0, 0, -seg.length);
  }
  return cal;
}

CalibrationPoses calibration_from_poses(const LimbChain& chain,
                                        const SegmentPoseSeries& poses) {
  const std::size_t n_frames = poses.times.size();
  for (std::size_t f = 0; f < n_frames; ++f) {
    bool all_valid = true;
    for (const auto& seg : poses.poses)
      if (!seg[f].valid) { all_valid = false; break; }
    if (!all_valid) continue;
    CalibrationPoses cal;
    cal.segment_names = poses.segment_names;
    for (const auto& seg : poses.poses) cal.poses.push_back(seg[f]);
    (void)chain;
    return cal;
  }
  throw InputError("calibration: no frame with all segment poses valid");
}

void bridge_gaps(std::vector<double>& values, const std::vector<bool>& valid,
                 const std::vector<double>& times, int max_gap, const std::string& what) {
  const std::size_t n = values.size();
  std::vector<double> tx, ty;
  for (std::size_t i = 0; i < n; ++i)
    if (valid[i]) { tx.push_back(times[i]); ty.push_back(values[i]); }
  if (tx.size() == n) return;
  if (tx.size() < 4) throw NumericError(what + ": too few valid frames to bridge gaps");

  std::size_t i = 0;
  while (i < n) {
    if (valid[i]) { ++i; continue; }
    std::size_t j = i;
    while (j < n && !valid[j]) ++j;
    const std::size_t run = j - i;
    if (i == 0 || j == n)
      throw NumericError(what + ": invalid frames at the series boundary cannot be bridged");
    if (int(run) > max_gap)
      throw NumericError(what + ": marker gap of " + std::to_string(run) +
                         " frames exceeds the " + std::to_string(max_gap) + "-frame limit");
    i = j;
  }
  CubicSpline spline(tx, ty);
  for (std::size_t k = 0; k < n; ++k)
    if (!valid[k]) values[k] = spline(times[k]);
}

JointStateSeries joint_states(const LimbChain& chain,
                              const SegmentPoseSeries& poses,
                              const CalibrationPoses& calibration,
                              double filter_cutoff_hz,
                              int max_gap_frames) {
  const std::size_t n = poses.times.size();
  if (n < 3) throw InputError("joint_states: needs at least 3 frames");
  const double dt = time_step(poses);

  JointStateSeries out;
  out.sample_rate = poses.sample_rate;
  out.times = poses.times;

  for (std::size_t ji = 0; ji < chain.joints.size(); ++ji) {
    const JointSpec& joint = chain.joints[ji];
    const int pi = poses.index_of(joint.proximal_segment);
    const int di = poses.index_of(joint.distal_segment);
    if (pi < 0 || di < 0)
      throw InputError("joint_states: missing pose series for joint " + joint.name);
    const auto& prox = poses.poses[pi];
    const auto& dist = poses.poses[di];

    const Pose rel_cal =
        relative_pose(calibration.of(joint.proximal_segment), calibration.of(joint.distal_segment));

    // Proximal-side socket: parent socket point or the distal end of the
    // proximal bone.
    Vec3 socket;
    if (joint.proximal_segment == chain.parent.name) {
      socket = chain.parent.socket_offset;
    } else {
      socket = Vec3(0, 0, -chain.segment(joint.proximal_segment).length);
    }
    const Pose& cal_p = calibration.of(joint.proximal_segment);
    const Pose& cal_d = calibration.of(joint.distal_segment);
    const Vec3 u_cal = cal_p.rotation.transpose() *
                       ((cal_d.rotation * joint.center_offset + cal_d.translation) -
                        (cal_p.rotation * socket + cal_p.translation));

    JointState js;
    js.joint = joint.name;
    js.valid.assign(n, true);
    std::array<std::vector<double>, 3> raw_ang, raw_trans;
    for (auto& v : raw_ang) v.assign(n, 0.0);
    for (auto& v : raw_trans) v.assign(n, 0.0);

    for (std::size_t f = 0; f < n; ++f) {
      if (!prox[f].valid || !dist[f].valid) { js.valid[f] = false; continue; }
      const Pose rel = relative_pose(prox[f], dist[f]);
      const RotationDecomposition dec = decompose_rotation(rel.rotation, rel_cal.rotation);
      if (dec.singular) { js.valid[f] = false; continue; }
      raw_ang[0][f] = dec.alpha;
      raw_ang[1][f] = dec.beta;
      raw_ang[2][f] = dec.gamma;
      const Vec3 u = prox[f].rotation.transpose() *
                         ((dist[f].rotation * joint.center_offset + dist[f].translation) -
                          (prox[f].rotation * socket + prox[f].translation)) -
                     u_cal;
      for (int k = 0; k < 3; ++k) raw_trans[k][f] = u[k];
    }

    for (int k = 0; k < 3; ++k) {
      bridge_gaps(raw_ang[k], js.valid, poses.times, max_gap_frames, "joint " + joint.name);
      bridge_gaps(raw_trans[k], js.valid, poses.times, max_gap_frames, "joint " + joint.name);
    }
    if (!joint.translations_enabled)
      for (auto& v : raw_trans) std::fill(v.begin(), v.end(), 0.0);

    std::array<std::vector<double>, 3> ang_f, trans_f, ang_r, trans_r, ang_a, trans_a;
    for (int k = 0; k < 3; ++k) {
      ang_f[k] = low_pass_filter(raw_ang[k], poses.sample_rate, filter_cutoff_hz);
      trans_f[k] = low_pass_filter(raw_trans[k], poses.sample_rate, filter_cutoff_hz);
      ang_r[k] = differentiate(ang_f[k], dt);
      trans_r[k] = differentiate(trans_f[k], dt);
      ang_a[k] = differentiate(ang_r[k], dt);
      trans_a[k] = differentiate(trans_r[k], dt);
    }

    js.angles.resize(n);
    js.angle_rates.resize(n);
    js.angle_accels.resize(n);
    js.trans.resize(n);
    js.trans_rates.resize(n);
    js.trans_accels.resize(n);
    js.ang_vel.resize(n);
    const Vec3 rs = joint.rotation_signs;
    const Vec3 ts = joint.translation_signs;
    for (std::size_t f = 0; f < n; ++f) {
      const Vec3 raw_angles(ang_f[0][f], ang_f[1][f], ang_f[2][f]);
      const Vec3 raw_rates(ang_r[0][f], ang_r[1][f], ang_r[2][f]);
      js.angles[f] = rs.cwiseProduct(raw_angles);
      js.angle_rates[f] = rs.cwiseProduct(raw_rates);
      js.angle_accels[f] = rs.cwiseProduct(Vec3(ang_a[0][f], ang_a[1][f], ang_a[2][f]));
      js.trans[f] = ts.cwiseProduct(Vec3(trans_f[0][f], trans_f[1][f], trans_f[2][f]));
      js.trans_rates[f] = ts.cwiseProduct(Vec3(trans_r[0][f], trans_r[1][f], trans_r[2][f]));
      js.trans_accels[f] = ts.cwiseProduct(Vec3(trans_a[0][f], trans_a[1][f], trans_a[2][f]));
      // relative angular velocity: proximal-frame vector, re-expressed on the
      // distal side, then anatomical signs
      const Vec3 w_prox = cardan_rates_to_angvel(raw_angles, raw_rates);
      const Mat3 m = compose_rotation(raw_angles[0], raw_angles[1], raw_angles[2]);
      js.ang_vel[f] = rs.cwiseProduct(m.transpose() * w_prox);
    }
    js.ang_acc.resize(n);
    for (int k = 0; k < 3; ++k) {
      std::vector<double> wk(n);
      for (std::size_t f = 0; f < n; ++f) wk[f] = js.ang_vel[f][k];
      auto dwk = differentiate(wk, dt);
      for (std::size_t f = 0; f < n; ++f) js.ang_acc[f][k] = dwk[f];
    }
    out.joints.push_back(std::move(js));
  }
  return out;
}

}  // namespace limbdyn
