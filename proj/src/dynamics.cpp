#include "limbdyn/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace limbdyn {

const JointLoad& NetJointLoadSeries::of(const std::string& joint) const {
  for (const auto& j : joints)
    if (j.joint == joint) return j;
  throw InputError("unknown joint in load series: " + joint);
}

namespace {

Vec3 vee(const Mat3& skew) {
  // antisymmetric part only; numerical differentiation leaves a small
  // symmetric contamination
  return Vec3(0.5 * (skew(2, 1) - skew(1, 2)),
              0.5 * (skew(0, 2) - skew(2, 0)),
              0.5 * (skew(1, 0) - skew(0, 1)));
}

Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double lerp_time(const std::vector<double>& times, double t, std::size_t& hint) {
  while (hint + 2 < times.size() && times[hint + 1] < t) ++hint;
  const double h = times[hint + 1] - times[hint];
  return (t - times[hint]) / h;
}

}  // namespace

SegmentSpatialState segment_spatial_states(const LimbChain& chain,
                                           const SegmentPoseSeries& poses,
                                           double filter_cutoff_hz) {
  const std::size_t n = poses.times.size();
  if (n < 3) throw InputError("spatial states: needs at least 3 frames");
  const double dt = time_step(poses);

  SegmentSpatialState out;
  out.sample_rate = poses.sample_rate;
  out.times = poses.times;

  for (const auto& seg : chain.segments) {
    const int si = poses.index_of(seg.name);
    if (si < 0) throw InputError("spatial states: missing pose series for " + seg.name);
    const auto& pose_series = poses.poses[si];
    std::vector<bool> valid(n);
    bool all_valid = true;
    for (std::size_t f = 0; f < n; ++f) {
      valid[f] = pose_series[f].valid;
      all_valid = all_valid && valid[f];
    }

    // filter every pose component, then rebuild orthonormal rotations
    std::array<std::vector<double>, 12> comp;
    for (auto& c : comp) c.resize(n);
    for (std::size_t f = 0; f < n; ++f) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) comp[3 * r + c][f] = pose_series[f].rotation(r, c);
      for (int k = 0; k < 3; ++k) comp[9 + k][f] = pose_series[f].translation[k];
    }
    if (!all_valid)
      for (auto& c : comp) bridge_gaps(c, valid, poses.times, 5, "segment " + seg.name);
    if (filter_cutoff_hz > 0.0)
      for (auto& c : comp) c = low_pass_filter(c, poses.sample_rate, filter_cutoff_hz);

    const bool reproject = filter_cutoff_hz > 0.0 || !all_valid;
    std::vector<Mat3> rot(n);
    std::vector<Vec3> trans(n);
    for (std::size_t f = 0; f < n; ++f) {
      Mat3 m;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = comp[3 * r + c][f];
      rot[f] = reproject ? project_to_so3(m) : m;
      trans[f] = Vec3(comp[9][f], comp[10][f], comp[11][f]);
    }

    SegmentState st;
    st.segment = seg.name;
    st.rotation = rot;
    st.origin = trans;
    st.com_pos.resize(n);
    for (std::size_t f = 0; f < n; ++f)
      st.com_pos[f] = rot[f] * seg.com_offset + trans[f];

    auto derive3 = [&](const std::vector<Vec3>& src) {
      std::vector<Vec3> dst(n);
      for (int k = 0; k < 3; ++k) {
        std::vector<double> ch(n);
        for (std::size_t f = 0; f < n; ++f) ch[f] = src[f][k];
        auto d = differentiate(ch, dt);
        for (std::size_t f = 0; f < n; ++f) dst[f][k] = d[f];
      }
      return dst;
    };
    st.com_vel = derive3(st.com_pos);
    st.com_acc = derive3(st.com_vel);

    // angular velocity from the skew part of Rdot R^T
    std::array<std::vector<double>, 9> rdot;
    for (int k = 0; k < 9; ++k) {
      std::vector<double> ch(n);
      for (std::size_t f = 0; f < n; ++f) ch[f] = rot[f](k / 3, k % 3);
      rdot[k] = differentiate(ch, dt);
    }
    st.ang_vel.resize(n);
    for (std::size_t f = 0; f < n; ++f) {
      Mat3 rd;
      for (int k = 0; k < 9; ++k) rd(k / 3, k % 3) = rdot[k][f];
      st.ang_vel[f] = vee(rd * rot[f].transpose());
    }
    st.ang_acc = derive3(st.ang_vel);
    out.segments.push_back(std::move(st));
  }
  return out;
}

GrfSeries resample_grf(const GrfSeries& grf, std::span<const double> target_times,
                       double grf_cutoff_hz, double contact_threshold_n) {
  if (grf.times.size() < 2) throw InputError("resample_grf: source series too short");
  const double t0 = grf.times.front(), t1 = grf.times.back();
  const double slack = 1e-9 * std::max(1.0, std::abs(t1));
  for (double t : target_times)
    if (t < t0 - slack || t > t1 + slack)
      throw InputError("resample_grf: target time outside the recorded span");

  std::array<std::vector<double>, 4> chan;  // fx fy fz tz
  const std::size_t n = grf.times.size();
  for (auto& c : chan) c.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    for (int k = 0; k < 3; ++k) chan[k][f] = grf.force[f][k];
    chan[3][f] = grf.free_moment.empty() ? 0.0 : grf.free_moment[f];
  }
  if (grf_cutoff_hz > 0.0)
    for (auto& c : chan) c = low_pass_filter(c, grf.sample_rate, grf_cutoff_hz);

  GrfSeries out;
  out.times.assign(target_times.begin(), target_times.end());
  out.sample_rate = target_times.size() > 1
                        ? double(target_times.size() - 1) /
                              (target_times.back() - target_times.front())
                        : 0.0;
  out.force.resize(target_times.size());
  out.cop.resize(target_times.size());
  out.free_moment.resize(target_times.size());
  out.cop_valid.resize(target_times.size());

  std::size_t hint = 0;
  for (std::size_t i = 0; i < target_times.size(); ++i) {
    const double t = std::clamp(target_times[i], t0, t1);
    const double a = lerp_time(grf.times, t, hint);
    auto lerp = [&](const std::vector<double>& c) {
      return (1.0 - a) * c[hint] + a * c[hint + 1];
    };
    out.force[i] = Vec3(lerp(chan[0]), lerp(chan[1]), lerp(chan[2]));
    out.free_moment[i] = lerp(chan[3]);
    const bool contact = out.force[i].z() > contact_threshold_n &&
                         grf.cop_valid[hint] && grf.cop_valid[hint + 1];
    out.cop_valid[i] = contact;
    out.cop[i] = contact ? Vec3((1.0 - a) * grf.cop[hint] + a * grf.cop[hint + 1])
                         : Vec3::Zero();
  }
  return out;
}

NetJointLoadSeries inverse_dynamics(const LimbChain& chain,
                                    const SegmentSpatialState& spatial,
                                    const GrfSeries& grf,
                                    double gravity) {
  const std::size_t n = spatial.times.size();
  const std::size_t ns = chain.segments.size();
  if (spatial.segments.size() != ns)
    throw InputError("inverse_dynamics: spatial state does not match the chain");
  if (grf.times.size() != n)
    throw InputError("inverse_dynamics: GRF series is not aligned to the kinematic frames");

  NetJointLoadSeries out;
  out.sample_rate = spatial.sample_rate;
  out.times = spatial.times;
  out.joints.resize(ns);
  for (std::size_t ji = 0; ji < ns; ++ji) {
    auto& jl = out.joints[ji];
    jl.joint = chain.joints[ji].name;
    jl.moment.resize(n);
    jl.force.resize(n);
    jl.moment_per_kg.resize(n);
    jl.force_per_kg.resize(n);
    jl.moment_lab.resize(n);
    jl.force_lab.resize(n);
  }

  const Vec3 g_vec(0, 0, -gravity);
  for (std::size_t f = 0; f < n; ++f) {
    Vec3 f_child = Vec3::Zero();   // force this segment applies to its distal neighbor
    Vec3 m_child = Vec3::Zero();
    Vec3 jc_child = Vec3::Zero();  // that joint's center, lab
    for (std::size_t i = ns; i-- > 0;) {
      const SegmentSpec& seg = chain.segments[i];
      const SegmentState& st = spatial.segments[i];
      const JointSpec& joint = chain.joints[i];

      Vec3 f_ext = Vec3::Zero(), m_ext = Vec3::Zero(), r_ext = Vec3::Zero();
      if (i == ns - 1 && grf.cop_valid[f]) {
        f_ext = grf.force[f];
        r_ext = grf.cop[f];
        m_ext = Vec3(0, 0, grf.free_moment[f]);
      }

      const Vec3 jc = st.rotation[f] * joint.center_offset + st.origin[f];
      const Mat3 inertia_lab = st.rotation[f] * seg.inertia * st.rotation[f].transpose();
      const Vec3 f_joint =
          seg.mass * st.com_acc[f] - seg.mass * g_vec - f_ext + f_child;
      Vec3 m_joint = inertia_lab * st.ang_acc[f] +
                     st.ang_vel[f].cross(inertia_lab * st.ang_vel[f]) -
                     (jc - st.com_pos[f]).cross(f_joint) - m_ext;
      if (i == ns - 1 && grf.cop_valid[f]) {
        m_joint -= (r_ext - st.com_pos[f]).cross(f_ext);
      }
      if (i + 1 < ns) {
        m_joint += m_child + (jc_child - st.com_pos[f]).cross(f_child);
      }

      auto& jl = out.joints[i];
      jl.force_lab[f] = f_joint;
      jl.moment_lab[f] = m_joint;
      const Mat3 to_seg = st.rotation[f].transpose();
      jl.force[f] = joint.translation_signs.cwiseProduct(to_seg * f_joint);
      jl.moment[f] = joint.rotation_signs.cwiseProduct(to_seg * m_joint);
      jl.force_per_kg[f] = jl.force[f] / chain.body_mass;
      jl.moment_per_kg[f] = jl.moment[f] / chain.body_mass;

      f_child = f_joint;
      m_child = m_joint;
      jc_child = jc;
    }
  }
  return out;
}

PhaseEvents detect_stance(const GrfSeries& grf, double threshold_n) {
  if (grf.times.size() < 2) throw InputError("detect_stance: series too short");
  const std::size_t n = grf.times.size();

  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::size_t i = 0;
  while (i < n) {
    if (grf.force[i].z() > threshold_n) {
      std::size_t j = i;
      while (j < n && grf.force[j].z() > threshold_n) ++j;
      runs.emplace_back(i, j - 1);
      i = j;
    } else {
      ++i;
    }
  }
  if (runs.empty()) throw InputError("detect_stance: no contact above threshold");
  if (runs.size() > 1)
    throw InputError("detect_stance: found " + std::to_string(runs.size()) +
                     " contact episodes, expected one");

  const auto [first, last] = runs.front();
  auto crossing = [&](std::size_t lo, std::size_t hi) {
    // linear interpolation of the threshold crossing between two samples
    const double f0 = grf.force[lo].z(), f1 = grf.force[hi].z();
    if (std::abs(f1 - f0) < 1e-12) return grf.times[lo];
    const double a = (threshold_n - f0) / (f1 - f0);
    return grf.times[lo] + a * (grf.times[hi] - grf.times[lo]);
  };

  PhaseEvents ev;
  ev.stride_begin = grf.times.front();
  ev.stride_end = grf.times.back();
  ev.stance_begin = first > 0 ? crossing(first - 1, first) : grf.times[first];
  ev.stance_end = last + 1 < n ? crossing(last + 1, last) : grf.times[last];
  if (ev.stance_end < ev.stance_begin) std::swap(ev.stance_begin, ev.stance_end);
  ev.stance_fraction = (ev.stance_end - ev.stance_begin) / (ev.stride_end - ev.stride_begin);
  return ev;
}

double whole_chain_balance_residual(const LimbChain& chain,
                                    const SegmentSpatialState& spatial,
                                    const GrfSeries& grf,
                                    const NetJointLoadSeries& loads,
                                    double gravity) {
  const std::size_t n = spatial.times.size();
  const Vec3 g_vec(0, 0, -gravity);
  double worst = 0.0;
  for (std::size_t f = 0; f < n; ++f) {
    Vec3 inertial = Vec3::Zero();
    Vec3 weight = Vec3::Zero();
    for (std::size_t i = 0; i < chain.segments.size(); ++i) {
      inertial += chain.segments[i].mass * spatial.segments[i].com_acc[f];
      weight += chain.segments[i].mass * g_vec;
    }
    const Vec3 external = (grf.cop_valid[f] ? grf.force[f] : Vec3::Zero()) + weight +
                          loads.joints.front().force_lab[f];
    const double scale = std::max({inertial.norm(), external.norm(), 1e-9});
    worst = std::max(worst, (inertial - external).norm() / scale);
  }
  return worst;
}

std::vector<Vec3> grf_ground_moment(const LimbChain& chain,
                                    const SegmentSpatialState& spatial,
                                    const GrfSeries& grf) {
  const std::size_t n = spatial.times.size();
  const SegmentState& last = spatial.segments.back();
  const JointSpec& joint = chain.joints.back();
  std::vector<Vec3> out(n, Vec3::Zero());
  for (std::size_t f = 0; f < n; ++f) {
    if (!grf.cop_valid[f]) continue;
    const Vec3 jc = last.rotation[f] * joint.center_offset + last.origin[f];
    out[f] = (grf.cop[f] - jc).cross(grf.force[f]) + Vec3(0, 0, grf.free_moment[f]);
  }
  return out;
}

}  // namespace limbdyn
