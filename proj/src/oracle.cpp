#include "limbdyn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace limbdyn {

using nlohmann::json;
using std::numbers::pi;

double Signal::value(double t) const {
  double v = offset + slope * t;
  for (const auto& h : harmonics) v += h.amp * std::sin(2.0 * pi * h.freq_hz * t + h.phase);
  return v;
}

double Signal::rate(double t) const {
  double v = slope;
  for (const auto& h : harmonics)
    v += h.amp * 2.0 * pi * h.freq_hz * std::cos(2.0 * pi * h.freq_hz * t + h.phase);
  return v;
}

double Signal::accel(double t) const {
  double v = 0.0;
  for (const auto& h : harmonics) {
    const double w = 2.0 * pi * h.freq_hz;
    v -= h.amp * w * w * std::sin(w * t + h.phase);
  }
  return v;
}

Vec3 GrfScript::force(double t) const {
  if (t < stance_begin_s || t >= stance_end_s || stance_end_s <= stance_begin_s)
    return Vec3::Zero();
  const double s = (t - stance_begin_s) / (stance_end_s - stance_begin_s);
  const double hump = std::pow(std::sin(pi * s), shape_power);
  return Vec3(fore_aft_amp_n * -std::sin(2.0 * pi * s), transverse_amp_n * hump,
              peak_vertical_n * hump);
}

Vec3 GrfScript::cop(double t) const {
  if (t < stance_begin_s || t >= stance_end_s || stance_end_s <= stance_begin_s)
    return Vec3::Zero();
  const double s = (t - stance_begin_s) / (stance_end_s - stance_begin_s);
  return cop_start + s * cop_travel;
}

namespace {

struct BodyState {  // one segment, one instant, lab frame; all analytic
  Mat3 rot;
  Vec3 origin, origin_vel, origin_acc;
  Vec3 ang_vel, ang_acc;
  Vec3 com, com_vel, com_acc;
};

// Rigid-point kinematics helper: state of a point fixed at local offset.
Vec3 point_pos(const BodyState& b, const Vec3& local) { return b.origin + b.rot * local; }
Vec3 point_vel(const BodyState& b, const Vec3& local) {
  return b.origin_vel + b.ang_vel.cross(b.rot * local);
}
Vec3 point_acc(const BodyState& b, const Vec3& local) {
  const Vec3 r = b.rot * local;
  return b.origin_acc + b.ang_acc.cross(r) + b.ang_vel.cross(b.ang_vel.cross(r));
}

void fill_com(const LimbChain& chain, std::size_t i, BodyState& b) {
  const Vec3& c = chain.segments[i].com_offset;
  b.com = point_pos(b, c);
  b.com_vel = point_vel(b, c);
  b.com_acc = point_acc(b, c);
}

// Chain kinematics at one instant from raw (unsigned) Cardan angles, rates
// and accelerations per joint, plus the base point trajectory.
std::vector<BodyState> chain_states(const LimbChain& chain,
                                    const std::vector<Vec3>& raw_ang,
                                    const std::vector<Vec3>& raw_rate,
                                    const std::vector<Vec3>& raw_accel,
                                    const Vec3& base, const Vec3& base_vel,
                                    const Vec3& base_acc) {
  const std::size_t ns = chain.segments.size();
  std::vector<BodyState> out(ns);
  Mat3 r_parent = Mat3::Identity();
  Vec3 w_parent = Vec3::Zero(), dw_parent = Vec3::Zero();
  Vec3 jc = base, jc_vel = base_vel, jc_acc = base_acc;

  for (std::size_t i = 0; i < ns; ++i) {
    const Mat3 m = compose_rotation(raw_ang[i][0], raw_ang[i][1], raw_ang[i][2]);
    const Vec3 w_rel = cardan_rates_to_angvel(raw_ang[i], raw_rate[i]);
    const Vec3 dw_rel = cardan_rates_to_angacc(raw_ang[i], raw_rate[i], raw_accel[i]);

    BodyState b;
    b.rot = r_parent * m;
    b.ang_vel = w_parent + r_parent * w_rel;
    b.ang_acc = dw_parent + w_parent.cross(r_parent * w_rel) + r_parent * dw_rel;

    const Vec3 c_off = chain.joints[i].center_offset;
    const Vec3 rc = b.rot * c_off;
    b.origin = jc - rc;
    b.origin_vel = jc_vel - b.ang_vel.cross(rc);
    b.origin_acc = jc_acc - b.ang_acc.cross(rc) - b.ang_vel.cross(b.ang_vel.cross(rc));
    fill_com(chain, i, b);
    out[i] = b;

    const Vec3 tip(0, 0, -chain.segments[i].length);
    jc = point_pos(b, tip);
    jc_vel = point_vel(b, tip);
    jc_acc = point_acc(b, tip);
    r_parent = b.rot;
    w_parent = b.ang_vel;
    dw_parent = b.ang_acc;
  }
  return out;
}

// Ground-truth loads by direct summation over the distal sub-chain. This is
// the non-recursive form of the balance, kept deliberately separate from the
// production recursion so the two routes can disagree.
void truth_loads_at(const LimbChain& chain, const std::vector<BodyState>& bodies,
                    const Vec3& f_ext, const Vec3& cop, double free_moment,
                    double gravity, std::vector<Vec3>& forces, std::vector<Vec3>& moments) {
  const std::size_t ns = chain.segments.size();
  const Vec3 g_vec(0, 0, -gravity);
  forces.assign(ns, Vec3::Zero());
  moments.assign(ns, Vec3::Zero());
  for (std::size_t i = 0; i < ns; ++i) {
    const Vec3 jc = point_pos(bodies[i], chain.joints[i].center_offset);
    Vec3 f = Vec3::Zero(), m = Vec3::Zero();
    for (std::size_t k = i; k < ns; ++k) {
      const auto& seg = chain.segments[k];
      const auto& b = bodies[k];
      const Vec3 fk = seg.mass * (b.com_acc - g_vec);
      f += fk;
      const Mat3 inertia_lab = b.rot * seg.inertia * b.rot.transpose();
      m += inertia_lab * b.ang_acc + b.ang_vel.cross(inertia_lab * b.ang_vel) +
           (b.com - jc).cross(fk);
    }
    f -= f_ext;
    m -= (cop - jc).cross(f_ext) + Vec3(0, 0, free_moment);
    forces[i] = f;
    moments[i] = m;
  }
}

struct PlanarModel {
  // absolute link angles about +y; d(theta) = (-sin, 0, -cos) is the unit
  // vector from a joint toward the distal end
  const LimbChain& chain;
  std::vector<double> lengths, masses, inertias_y, com_dist;

  explicit PlanarModel(const LimbChain& c) : chain(c) {
    for (const auto& s : c.segments) {
      lengths.push_back(s.length);
      masses.push_back(s.mass);
      inertias_y.push_back(s.inertia(1, 1));
      if (std::abs(s.com_offset.x()) > 1e-12 || std::abs(s.com_offset.y()) > 1e-12)
        throw InputError("torque-driven scenarios need on-axis segment COMs");
      com_dist.push_back(-s.com_offset.z());
    }
  }

  double arm(std::size_t i, std::size_t j) const {  // d r_ci / d theta_j magnitude
    if (j < i) return lengths[j];
    if (j == i) return com_dist[i];
    return 0.0;
  }

  // M thetadd = Q - C - G; returns thetadd
  std::vector<double> accel(const std::vector<double>& th, const std::vector<double>& thd,
                            const std::vector<double>& joint_torques, double gravity) const {
    const std::size_t n = th.size();
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        double mu = 0.0;
        for (std::size_t i = std::max(j, k); i < n; ++i) mu += masses[i] * arm(i, j) * arm(i, k);
        mass(j, k) = mu * std::cos(th[j] - th[k]);
        if (j == k) mass(j, k) += inertias_y[j];
        rhs(j) -= mu * std::sin(th[j] - th[k]) * thd[k] * thd[k];
      }
      double w = 0.0;
      for (std::size_t i = j; i < n; ++i) w += masses[i] * arm(i, j);
      rhs(j) -= gravity * w * std::sin(th[j]);  // dV/dth_j with V = -sum m g l cos
      rhs(j) += joint_torques[j] - (j + 1 < n ? joint_torques[j + 1] : 0.0);
    }
    Eigen::VectorXd acc = mass.ldlt().solve(rhs);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = acc(i);
    return out;
  }
};

double box_muller(std::mt19937_64& rng) {
  // deterministic across standard libraries, unlike std::normal_distribution
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u1 = 0.0;
  do { u1 = uni(rng); } while (u1 <= 1e-300);
  const double u2 = uni(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
}

}  // namespace

LimbChain pendulum_chain(const std::vector<double>& lengths,
                         const std::vector<double>& masses, double body_mass) {
  if (lengths.size() != masses.size() || lengths.empty())
    throw InputError("pendulum_chain: need matching non-empty lengths and masses");
  LimbChain chain;
  chain.name = "pendulum";
  chain.body_mass = body_mass;
  chain.parent.name = "base";
  chain.parent.marker_template = {
      {"b1", Vec3(0.05, 0.0, 0.02)}, {"b2", Vec3(-0.03, 0.05, 0.10)},
      {"b3", Vec3(0.02, -0.04, 0.17)}, {"b4", Vec3(-0.04, -0.03, 0.26)}};
  std::vector<std::string> joint_names;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    SegmentSpec s;
    s.name = "link" + std::to_string(i);
    s.length = lengths[i];
    s.mass = masses[i];
    s.com_offset = Vec3(0, 0, -0.5 * lengths[i]);
    const double rod_inertia = masses[i] * lengths[i] * lengths[i] / 12.0;
    s.inertia = Vec3(rod_inertia, rod_inertia, 0.002 * masses[i]).asDiagonal();
    const double l = lengths[i];
    s.marker_template = {{"m1", Vec3(0.05, 0.01, -0.08 * l)},
                         {"m2", Vec3(-0.03, 0.05, -0.35 * l)},
                         {"m3", Vec3(0.02, -0.05, -0.6 * l)},
                         {"m4", Vec3(-0.05, -0.02, -0.9 * l)}};
    JointSpec j;
    j.name = "joint" + std::to_string(i);
    j.proximal_segment = i == 0 ? chain.parent.name : chain.segments.back().name;
    j.distal_segment = s.name;
    chain.segments.push_back(s);
    chain.joints.push_back(j);
    joint_names.push_back(j.name);
  }
  chain.convention = default_convention(joint_names);
  validate_chain(chain);
  return chain;
}

SimulationResult simulate_forward(const SyntheticScenario& scenario) {
  const LimbChain& chain = scenario.chain;
  const std::size_t ns = chain.segments.size();
  if (bool(scenario.angles) == bool(scenario.torques))
    throw InputError("scenario must prescribe exactly one of angles or torques");

  const std::size_t n_frames =
      std::size_t(std::floor(scenario.duration_s * scenario.marker_rate_hz + 1e-9)) + 1;
  if (n_frames < 3) throw InputError("scenario too short for the marker rate");
  std::vector<double> times(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) times[i] = double(i) / scenario.marker_rate_hz;

  // raw Cardan angle states per joint per frame (+ base trajectory)
  std::vector<std::vector<Vec3>> ang(n_frames, std::vector<Vec3>(ns, Vec3::Zero()));
  auto rate = ang, accel = ang;
  std::vector<Vec3> base(n_frames, scenario.base_position);
  std::vector<Vec3> base_vel(n_frames, Vec3::Zero()), base_acc(n_frames, Vec3::Zero());
  std::vector<std::vector<double>> prescribed_torque;  // torque mode only

  if (scenario.angles) {
    const auto& script = *scenario.angles;
    if (script.joint_angles.size() != ns)
      throw InputError("angle script does not cover every joint");
    for (std::size_t f = 0; f < n_frames; ++f) {
      const double t = times[f];
      for (std::size_t j = 0; j < ns; ++j) {
        const Vec3 rs = chain.joints[j].rotation_signs;  // anatomical -> raw
        for (int k = 0; k < 3; ++k) {
          ang[f][j][k] = rs[k] * script.joint_angles[j][std::size_t(k)].value(t);
          rate[f][j][k] = rs[k] * script.joint_angles[j][std::size_t(k)].rate(t);
          accel[f][j][k] = rs[k] * script.joint_angles[j][std::size_t(k)].accel(t);
        }
      }
      for (int k = 0; k < 3; ++k) {
        base[f][k] = scenario.base_position[k] + script.base_position[std::size_t(k)].value(t);
        base_vel[f][k] = script.base_position[std::size_t(k)].rate(t);
        base_acc[f][k] = script.base_position[std::size_t(k)].accel(t);
      }
    }
  } else {
    const auto& script = *scenario.torques;
    if (script.joint_torques.size() != ns || script.initial_angles.size() != ns ||
        script.initial_rates.size() != ns)
      throw InputError("torque script does not cover every joint");
    if (scenario.grf)
      throw InputError("torque-driven scenarios do not support a scripted ground force");
    const PlanarModel model(chain);
    const double dt = scenario.dt;
    const double steps_per_frame_f = 1.0 / (scenario.marker_rate_hz * dt);
    const long steps_per_frame = std::llround(steps_per_frame_f);
    if (steps_per_frame < 1 || std::abs(steps_per_frame_f - double(steps_per_frame)) > 1e-6)
      throw InputError("marker rate must divide the integration grid (1/(rate*dt) integral)");

    // absolute angles from relative initial conditions
    std::vector<double> th(ns), thd(ns);
    double acc_sum = 0.0, rate_sum = 0.0;
    for (std::size_t j = 0; j < ns; ++j) {
      acc_sum += script.initial_angles[j];
      rate_sum += script.initial_rates[j];
      th[j] = acc_sum;
      thd[j] = rate_sum;
    }
    prescribed_torque.assign(n_frames, std::vector<double>(ns, 0.0));

    auto torques_at = [&](double t) {
      std::vector<double> tau(ns);
      for (std::size_t j = 0; j < ns; ++j) tau[j] = script.joint_torques[j].value(t);
      return tau;
    };
    auto deriv = [&](const std::vector<double>& th_, const std::vector<double>& thd_,
                     double t, std::vector<double>& dth, std::vector<double>& dthd) {
      dth = thd_;
      dthd = model.accel(th_, thd_, torques_at(t), scenario.gravity);
    };

    auto record = [&](std::size_t f, double t) {
      const auto tau = torques_at(t);
      const auto thdd = model.accel(th, thd, tau, scenario.gravity);
      double prev = 0.0, prev_d = 0.0, prev_dd = 0.0;
      for (std::size_t j = 0; j < ns; ++j) {
        ang[f][j] = Vec3(0, th[j] - prev, 0);
        rate[f][j] = Vec3(0, thd[j] - prev_d, 0);
        accel[f][j] = Vec3(0, thdd[j] - prev_dd, 0);
        prev = th[j];
        prev_d = thd[j];
        prev_dd = thdd[j];
        prescribed_torque[f][j] = tau[j];
      }
    };

    record(0, 0.0);
    std::vector<double> k1t(ns), k1d(ns), k2t(ns), k2d(ns), k3t(ns), k3d(ns), k4t(ns), k4d(ns);
    std::vector<double> tmp_t(ns), tmp_d(ns);
    for (std::size_t f = 1; f < n_frames; ++f) {
      for (long s = 0; s < steps_per_frame; ++s) {
        const double t = times[f - 1] + double(s) * dt;
        deriv(th, thd, t, k1t, k1d);
        for (std::size_t j = 0; j < ns; ++j) {
          tmp_t[j] = th[j] + 0.5 * dt * k1t[j];
          tmp_d[j] = thd[j] + 0.5 * dt * k1d[j];
        }
        deriv(tmp_t, tmp_d, t + 0.5 * dt, k2t, k2d);
        for (std::size_t j = 0; j < ns; ++j) {
          tmp_t[j] = th[j] + 0.5 * dt * k2t[j];
          tmp_d[j] = thd[j] + 0.5 * dt * k2d[j];
        }
        deriv(tmp_t, tmp_d, t + 0.5 * dt, k3t, k3d);
        for (std::size_t j = 0; j < ns; ++j) {
          tmp_t[j] = th[j] + dt * k3t[j];
          tmp_d[j] = thd[j] + dt * k3d[j];
        }
        deriv(tmp_t, tmp_d, t + dt, k4t, k4d);
        for (std::size_t j = 0; j < ns; ++j) {
          th[j] += dt / 6.0 * (k1t[j] + 2.0 * k2t[j] + 2.0 * k3t[j] + k4t[j]);
          thd[j] += dt / 6.0 * (k1d[j] + 2.0 * k2d[j] + 2.0 * k3d[j] + k4d[j]);
          if (!std::isfinite(th[j]) || std::abs(thd[j]) > 1e6)
            throw NumericError("forward integration diverged (reduce dt)");
        }
      }
      record(f, times[f]);
    }
  }

  // assemble per-frame body states and all outputs
  SimulationResult result;
  result.calibration = aligned_calibration(chain);
  result.poses.sample_rate = scenario.marker_rate_hz;
  result.poses.times = times;
  result.poses.segment_names.push_back(chain.parent.name);
  for (const auto& s : chain.segments) result.poses.segment_names.push_back(s.name);
  result.poses.poses.assign(ns + 1, std::vector<Pose>(n_frames));

  result.true_loads.sample_rate = scenario.marker_rate_hz;
  result.true_loads.times = times;
  result.true_loads.joints.resize(ns);
  result.true_powers.sample_rate = scenario.marker_rate_hz;
  result.true_powers.times = times;
  result.true_powers.joints.resize(ns);
  result.true_states.sample_rate = scenario.marker_rate_hz;
  result.true_states.times = times;
  result.true_states.joints.resize(ns);
  for (std::size_t j = 0; j < ns; ++j) {
    auto& jl = result.true_loads.joints[j];
    jl.joint = chain.joints[j].name;
    jl.moment.resize(n_frames);
    jl.force.resize(n_frames);
    jl.moment_per_kg.resize(n_frames);
    jl.force_per_kg.resize(n_frames);
    jl.moment_lab.resize(n_frames);
    jl.force_lab.resize(n_frames);
    auto& jp = result.true_powers.joints[j];
    jp.joint = chain.joints[j].name;
    jp.rotational.resize(n_frames);
    jp.translational.assign(n_frames, Vec3::Zero());
    jp.total.resize(n_frames);
    jp.rotational_per_kg.resize(n_frames);
    jp.translational_per_kg.assign(n_frames, Vec3::Zero());
    jp.total_per_kg.resize(n_frames);
    auto& st = result.true_states.joints[j];
    st.joint = chain.joints[j].name;
    st.angles.resize(n_frames);
    st.angle_rates.resize(n_frames);
    st.angle_accels.resize(n_frames);
    st.trans.assign(n_frames, Vec3::Zero());
    st.trans_rates.assign(n_frames, Vec3::Zero());
    st.trans_accels.assign(n_frames, Vec3::Zero());
    st.ang_vel.resize(n_frames);
    st.ang_acc.resize(n_frames);
    st.valid.assign(n_frames, true);
  }
  result.mechanical_energy.resize(n_frames);

  std::vector<Vec3> tf, tm;
  for (std::size_t f = 0; f < n_frames; ++f) {
    const auto bodies =
        chain_states(chain, ang[f], rate[f], accel[f], base[f], base_vel[f], base_acc[f]);

    Pose parent_pose;
    parent_pose.translation = base[f] - chain.parent.socket_offset;
    result.poses.poses[0][f] = parent_pose;
    for (std::size_t i = 0; i < ns; ++i) {
      Pose p;
      p.rotation = bodies[i].rot;
      p.translation = bodies[i].origin;
      result.poses.poses[i + 1][f] = p;
    }

    const Vec3 f_ext = scenario.grf ? scenario.grf->force(times[f]) : Vec3::Zero();
    const Vec3 cop = scenario.grf ? scenario.grf->cop(times[f]) : Vec3::Zero();
    truth_loads_at(chain, bodies, f_ext, cop, 0.0, scenario.gravity, tf, tm);

    double energy = 0.0;
    Vec3 w_prev = Vec3::Zero(), dw_prev = Vec3::Zero();
    for (std::size_t i = 0; i < ns; ++i) {
      const auto& b = bodies[i];
      const auto& seg = chain.segments[i];
      const Mat3 inertia_lab = b.rot * seg.inertia * b.rot.transpose();
      energy += 0.5 * seg.mass * b.com_vel.squaredNorm() +
                0.5 * b.ang_vel.dot(inertia_lab * b.ang_vel) +
                seg.mass * scenario.gravity * b.com.z();

      auto& jl = result.true_loads.joints[i];
      const Vec3 rs = chain.joints[i].rotation_signs;
      const Vec3 ts = chain.joints[i].translation_signs;
      jl.force_lab[f] = tf[i];
      jl.moment_lab[f] = tm[i];
      jl.force[f] = ts.cwiseProduct(b.rot.transpose() * tf[i]);
      jl.moment[f] = rs.cwiseProduct(b.rot.transpose() * tm[i]);
      jl.force_per_kg[f] = jl.force[f] / chain.body_mass;
      jl.moment_per_kg[f] = jl.moment[f] / chain.body_mass;

      // torque-driven mode: overwrite the y moment with the prescribed value
      // (identical in exact arithmetic; the script is the ground truth)
      if (!prescribed_torque.empty()) {
        jl.moment_lab[f] = Vec3(0, prescribed_torque[f][i], 0);
        jl.moment[f] = rs.cwiseProduct(b.rot.transpose() * jl.moment_lab[f]);
        jl.moment_per_kg[f] = jl.moment[f] / chain.body_mass;
      }

      auto& st = result.true_states.joints[i];
      st.angles[f] = rs.cwiseProduct(ang[f][i]);
      st.angle_rates[f] = rs.cwiseProduct(rate[f][i]);
      st.angle_accels[f] = rs.cwiseProduct(accel[f][i]);
      st.ang_vel[f] = rs.cwiseProduct(b.rot.transpose() * (b.ang_vel - w_prev));
      st.ang_acc[f] = rs.cwiseProduct(b.rot.transpose() * (b.ang_acc - dw_prev));

      auto& jp = result.true_powers.joints[i];
      jp.rotational[f] = jl.moment[f].cwiseProduct(st.ang_vel[f]);
      jp.total[f] = jp.rotational[f].sum();
      jp.rotational_per_kg[f] = jp.rotational[f] / chain.body_mass;
      jp.total_per_kg[f] = jp.total[f] / chain.body_mass;

      w_prev = b.ang_vel;
      dw_prev = b.ang_acc;
    }
    result.mechanical_energy[f] = energy;
  }

  // markers (with optional jitter)
  result.markers.sample_rate = scenario.marker_rate_hz;
  result.markers.times = times;
  std::mt19937_64 rng(scenario.seed);
  auto emit_markers = [&](const std::string& name,
                          const std::vector<MarkerTemplatePoint>& tmpl,
                          const std::vector<Pose>& poses) {
    SegmentMarkers sm;
    sm.segment = name;
    for (const auto& p : tmpl) sm.labels.push_back(p.label);
    sm.positions.assign(n_frames, std::vector<Vec3>(tmpl.size(), Vec3::Zero()));
    sm.valid.assign(n_frames, std::vector<bool>(tmpl.size(), true));
    for (std::size_t f = 0; f < n_frames; ++f)
      for (std::size_t m = 0; m < tmpl.size(); ++m) {
        Vec3 p = poses[f].rotation * tmpl[m].position + poses[f].translation;
        if (scenario.noise_sigma_m > 0.0)
          p += scenario.noise_sigma_m *
               Vec3(box_muller(rng), box_muller(rng), box_muller(rng));
        sm.positions[f][m] = p;
      }
    result.markers.segments.push_back(std::move(sm));
  };
  emit_markers(chain.parent.name, chain.parent.marker_template, result.poses.poses[0]);
  for (std::size_t i = 0; i < ns; ++i)
    emit_markers(chain.segments[i].name, chain.segments[i].marker_template,
                 result.poses.poses[i + 1]);

  // scripted ground force on its own (faster) clock plus on the marker clock
  auto fill_grf = [&](GrfSeries& grf, double rate_hz) {
    const std::size_t n = std::size_t(std::floor(scenario.duration_s * rate_hz + 1e-9)) + 1;
    grf.sample_rate = rate_hz;
    grf.times.resize(n);
    grf.force.resize(n);
    grf.cop.resize(n);
    grf.free_moment.assign(n, 0.0);
    grf.cop_valid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = double(i) / rate_hz;
      grf.times[i] = t;
      grf.force[i] = scenario.grf ? scenario.grf->force(t) : Vec3::Zero();
      grf.cop[i] = scenario.grf ? scenario.grf->cop(t) : Vec3::Zero();
      grf.cop_valid[i] = grf.force[i].z() > 0.0;
    }
  };
  fill_grf(result.grf, scenario.grf_rate_hz);
  result.grf_at_marker_times.sample_rate = scenario.marker_rate_hz;
  result.grf_at_marker_times.times = times;
  result.grf_at_marker_times.force.resize(n_frames);
  result.grf_at_marker_times.cop.resize(n_frames);
  result.grf_at_marker_times.free_moment.assign(n_frames, 0.0);
  result.grf_at_marker_times.cop_valid.resize(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    result.grf_at_marker_times.force[f] =
        scenario.grf ? scenario.grf->force(times[f]) : Vec3::Zero();
    result.grf_at_marker_times.cop[f] =
        scenario.grf ? scenario.grf->cop(times[f]) : Vec3::Zero();
    result.grf_at_marker_times.cop_valid[f] =
        result.grf_at_marker_times.force[f].z() > 0.0;
  }
  return result;
}

WorkEnergyReport work_energy_report(const LimbChain& chain,
                                    const SegmentSpatialState& spatial,
                                    const GrfSeries& grf_aligned,
                                    const NetJointLoadSeries& loads,
                                    const JointPowerSeries& powers,
                                    double gravity) {
  const std::size_t n = spatial.times.size();
  const std::size_t ns = chain.segments.size();
  std::vector<double> energy(n), power(n);
  double peak_kinetic = 0.0;
  for (std::size_t f = 0; f < n; ++f) {
    double e = 0.0, kin = 0.0;
    for (std::size_t i = 0; i < ns; ++i) {
      const auto& seg = chain.segments[i];
      const auto& st = spatial.segments[i];
      const Mat3 inertia_lab = st.rotation[f] * seg.inertia * st.rotation[f].transpose();
      kin += 0.5 * seg.mass * st.com_vel[f].squaredNorm() +
             0.5 * st.ang_vel[f].dot(inertia_lab * st.ang_vel[f]);
      e += seg.mass * gravity * st.com_pos[f].z();
    }
    energy[f] = e + kin;
    peak_kinetic = std::max(peak_kinetic, kin);

    double p = 0.0;
    for (std::size_t i = 1; i < ns; ++i) p += powers.joints[i].total[f];
    // most proximal joint as a boundary: absolute velocities of the first
    // segment's attachment point
    const auto& st0 = spatial.segments[0];
    const Vec3 jc0 = st0.rotation[f] * chain.joints[0].center_offset + st0.origin[f];
    const Vec3 v_attach = st0.com_vel[f] + st0.ang_vel[f].cross(jc0 - st0.com_pos[f]);
    p += loads.joints[0].force_lab[f].dot(v_attach) +
         loads.joints[0].moment_lab[f].dot(st0.ang_vel[f]);
    if (grf_aligned.cop_valid[f]) {
      const auto& stl = spatial.segments[ns - 1];
      const Vec3 v_cop =
          stl.com_vel[f] + stl.ang_vel[f].cross(grf_aligned.cop[f] - stl.com_pos[f]);
      p += grf_aligned.force[f].dot(v_cop) +
           grf_aligned.free_moment[f] * stl.ang_vel[f].z();
    }
    power[f] = p;
  }

  WorkEnergyReport rep;
  rep.delta_energy = energy.back() - energy.front();
  for (std::size_t f = 0; f + 1 < n; ++f)
    rep.total_work +=
        0.5 * (power[f] + power[f + 1]) * (spatial.times[f + 1] - spatial.times[f]);
  double excursion = 0.0;
  for (double e : energy) excursion = std::max(excursion, std::abs(e - energy.front()));
  rep.energy_scale = std::max({excursion, peak_kinetic, 1e-9});
  rep.residual_relative = std::abs(rep.delta_energy - rep.total_work) / rep.energy_scale;
  return rep;
}

namespace {

ChannelError channel_error(const std::string& name, std::span<const double> est,
                           std::span<const double> truth, double scale,
                           const std::vector<bool>& included) {
  ChannelError ce;
  ce.name = name;
  ce.scale = scale;
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (!included[i]) continue;
    ce.max_abs_error = std::max(ce.max_abs_error, std::abs(est[i] - truth[i]));
  }
  ce.max_rel_error = scale > 1e-12 ? ce.max_abs_error / scale : ce.max_abs_error;
  return ce;
}

std::vector<bool> metric_mask(std::size_t n, std::size_t trim, int guard,
                              const std::vector<bool>& truth_contact,
                              const std::vector<bool>& pipeline_contact) {
  std::vector<bool> included(n, true);
  for (std::size_t i = 0; i < std::min(trim, n); ++i) {
    included[i] = false;
    included[n - 1 - i] = false;
  }
  if (guard > 0) {
    std::vector<std::size_t> transitions;
    for (std::size_t i = 1; i < n; ++i) {
      if (truth_contact[i] != truth_contact[i - 1]) transitions.push_back(i);
      if (pipeline_contact[i] != pipeline_contact[i - 1]) transitions.push_back(i);
    }
    for (std::size_t t : transitions) {
      const std::size_t lo = t > std::size_t(guard) ? t - std::size_t(guard) : 0;
      const std::size_t hi = std::min(n, t + std::size_t(guard) + 1);
      for (std::size_t i = lo; i < hi; ++i) included[i] = false;
    }
  }
  return included;
}

}  // namespace

RoundtripMetrics roundtrip_check(const SyntheticScenario& scenario,
                                 const RoundtripOptions& options) {
  return roundtrip_check(scenario, simulate_forward(scenario), options);
}

RoundtripMetrics roundtrip_check(const SyntheticScenario& scenario,
                                 const SimulationResult& sim,
                                 const RoundtripOptions& options) {
  const LimbChain& chain = scenario.chain;
  const auto poses = segment_poses(chain, sim.markers);
  const auto calibration = aligned_calibration(chain);
  const auto states = joint_states(chain, poses, calibration, options.kin_cutoff_hz);
  const auto spatial = segment_spatial_states(chain, poses, options.kin_cutoff_hz);
  const double threshold_n =
      options.contact_threshold_fraction * chain.body_mass * kGravity;
  const auto grf_aligned =
      resample_grf(sim.grf, poses.times, options.grf_cutoff_hz, threshold_n);
  const auto loads = inverse_dynamics(chain, spatial, grf_aligned, scenario.gravity);
  const auto powers = joint_power(chain, loads, states);

  RoundtripMetrics metrics;
  const std::size_t n = poses.times.size();
  const std::vector<bool> included =
      metric_mask(n, std::size_t(std::max(0, options.edge_trim_frames)),
                  options.transition_guard_frames, sim.grf_at_marker_times.cop_valid,
                  grf_aligned.cop_valid);

  auto scan3 = [&](const std::string& what, const std::vector<Vec3>& est,
                   const std::vector<Vec3>& truth, double& agg) {
    double scale = 0.0;
    for (std::size_t f = 0; f < n; ++f)
      if (included[f]) scale = std::max(scale, truth[f].cwiseAbs().maxCoeff());
    for (int k = 0; k < 3; ++k) {
      std::vector<double> e(n), t(n);
      for (std::size_t f = 0; f < n; ++f) {
        e[f] = est[f][k];
        t[f] = truth[f][k];
      }
      const ChannelError ce =
          channel_error(what + "[" + std::to_string(k) + "]", e, t, scale, included);
      metrics.channels.push_back(ce);
      agg = std::max(agg, ce.max_rel_error);
    }
  };

  for (std::size_t j = 0; j < chain.joints.size(); ++j) {
    const auto& name = chain.joints[j].name;
    scan3(name + ".moment", loads.joints[j].moment, sim.true_loads.joints[j].moment,
          metrics.torque_max_rel);
    scan3(name + ".force", loads.joints[j].force, sim.true_loads.joints[j].force,
          metrics.force_max_rel);
    scan3(name + ".rot_power", powers.joints[j].rotational,
          sim.true_powers.joints[j].rotational, metrics.rot_power_max_rel);
    scan3(name + ".trans_power", powers.joints[j].translational,
          sim.true_powers.joints[j].translational, metrics.trans_power_max_rel);
  }
  metrics.work_energy =
      work_energy_report(chain, spatial, grf_aligned, loads, powers, scenario.gravity);
  return metrics;
}

SyntheticScenario synth_trot(const TrotParams& params) {
  if (!(params.stance_fraction > 0.0 && params.stance_fraction < 1.0))
    throw InputError("synth_trot: stance fraction must be in (0,1)");
  if (!(params.stride_s > 0.0 && params.speed_mps > 0.0 &&
        params.peak_vertical_per_kg > 0.0))
    throw InputError("synth_trot: parameters must be positive");

  SyntheticScenario sc;
  sc.chain = default_chain();
  sc.duration_s = params.stride_s;
  sc.marker_rate_hz = params.marker_rate_hz;
  sc.grf_rate_hz = params.grf_rate_hz;
  sc.noise_sigma_m = params.noise_sigma_m;
  sc.seed = params.seed;

  const double T = params.stride_s;
  const double f0 = 1.0 / T;
  const double mass = sc.chain.body_mass;

  // widen the scripted window so the thresholded detection lands on the
  // requested stance fraction
  const double shape_power = 0.8;
  const double peak_n = params.peak_vertical_per_kg * mass;
  const double threshold_n = params.contact_threshold_fraction * mass * kGravity;
  const double s_cross = std::asin(std::pow(threshold_n / peak_n, 1.0 / shape_power)) / pi;
  const double width = params.stance_fraction / (1.0 - 2.0 * s_cross);

  GrfScript grf;
  grf.stance_begin_s = 0.0;
  grf.stance_end_s = width * T;
  grf.peak_vertical_n = peak_n;
  grf.shape_power = shape_power;
  grf.fore_aft_amp_n = 1.0 * mass;
  grf.transverse_amp_n = -0.2 * mass;
  const double stance_mid = 0.5 * width * T;
  grf.cop_start = Vec3(params.speed_mps * stance_mid - 0.03, 0.0, 0.0);
  grf.cop_travel = Vec3(0.06, 0.0, 0.0);
  sc.grf = grf;

  const double deg = pi / 180.0;
  auto osc = [&](double amp_deg, double phase, double amp2_deg, double phase2) {
    Signal s;
    s.harmonics = {{amp_deg * deg, f0, phase}, {amp2_deg * deg, 2.0 * f0, phase2}};
    return s;
  };

  AngleScript script;
  script.joint_angles.resize(sc.chain.joints.size());
  // stance-quiet, swing-active flexion profiles; small off-sagittal motion
  for (std::size_t j = 0; j < sc.chain.joints.size(); ++j) {
    const std::string& name = sc.chain.joints[j].name;
    std::array<Signal, 3>& a = script.joint_angles[j];
    if (name == "elbow") {
      a[1] = osc(9.0, -0.4, 2.5, 0.7);
      a[0] = osc(2.0, 0.3, 0.8, 1.1);
      a[2] = osc(1.2, 1.9, 0.4, 0.2);
    } else if (name == "carpus") {
      a[1] = osc(28.0, -1.1, 8.0, 0.2);
      a[0] = osc(2.5, 1.2, 0.7, -0.5);
      a[2] = osc(1.5, -0.7, 0.5, 0.9);
    } else if (name == "fetlock") {
      a[1] = osc(14.0, 2.1, 4.0, -0.9);
      a[0] = osc(1.8, -1.4, 0.6, 0.4);
      a[2] = osc(1.0, 0.8, 0.3, -1.2);
    } else {  // pastern / coffin
      a[1] = osc(7.0, 1.3, 2.0, 0.5);
      a[0] = osc(1.2, -0.2, 0.4, 1.5);
      a[2] = osc(0.8, 2.4, 0.2, -0.3);
    }
  }
  // forward travel with a light double-bounce vertical bob
  script.base_position[0].slope = params.speed_mps;
  script.base_position[2].harmonics = {{0.012, 2.0 * f0, 0.9}};
  sc.angles = script;

  double chain_length = 0.0;
  for (const auto& s : sc.chain.segments) chain_length += s.length;
  sc.base_position = Vec3(0.0, 0.0, chain_length + 0.03);
  return sc;
}

TrialBundle bundle_from_simulation(const SimulationResult& sim, const std::string& id) {
  TrialBundle bundle;
  bundle.id = id;
  bundle.markers = sim.markers;
  bundle.grf = sim.grf;
  return bundle;
}

const std::string& default_chain_config_text() {
  // Inertial coefficients are representative defaults for a warmblood-sized
  // horse; replace with subject-specific values for real work.
  static const std::string text = R"({
  "name": "horse-forelimb-right",
  "body_mass_kg": 433.0,
  "parent": {
    "name": "humerus",
    "socket_offset_m": [0.0, 0.0, 0.0],
    "markers": {
      "hum1": [0.05, 0.01, 0.08],
      "hum2": [-0.04, 0.05, 0.18],
      "hum3": [0.02, -0.05, 0.30]
    }
  },
  "inertial_coefficients": {
    "radius":  {"mass_fraction": 0.0210, "com_fraction": 0.42, "gyration_fractions": [0.32, 0.32, 0.10]},
    "cannon":  {"mass_fraction": 0.0032, "com_fraction": 0.45, "gyration_fractions": [0.30, 0.30, 0.12]},
    "pastern": {"mass_fraction": 0.0010, "com_fraction": 0.45, "gyration_fractions": [0.30, 0.30, 0.14]},
    "hoof":    {"mass_fraction": 0.0018, "com_fraction": 0.50, "gyration_fractions": [0.32, 0.32, 0.20]}
  },
  "segments": [
    {
      "name": "radius", "length_m": 0.369,
      "markers": {
        "rad1": [0.05, 0.01, -0.04],
        "rad2": [-0.02, -0.05, -0.10],
        "rad3": [0.04, 0.04, -0.20],
        "rad4": [-0.03, 0.02, -0.31]
      }
    },
    {
      "name": "cannon", "length_m": 0.282,
      "markers": {
        "can1": [0.04, 0.01, -0.03],
        "can2": [-0.02, -0.04, -0.09],
        "can3": [0.03, 0.03, -0.16],
        "can4": [-0.03, 0.02, -0.24]
      }
    },
    {
      "name": "pastern", "length_m": 0.114,
      "markers": {
        "pas1": [0.03, 0.01, -0.01],
        "pas2": [-0.02, -0.03, -0.05],
        "pas3": [0.02, 0.03, -0.08],
        "pas4": [-0.02, 0.02, -0.10]
      }
    },
    {
      "name": "hoof", "length_m": 0.080,
      "markers": {
        "hf1": [0.03, 0.01, -0.01],
        "hf2": [-0.02, -0.03, -0.03],
        "hf3": [0.02, 0.03, -0.05],
        "hf4": [-0.02, 0.02, -0.07]
      }
    }
  ],
  "joints": [
    {
      "name": "elbow", "proximal": "humerus", "distal": "radius",
      "translations_enabled": true,
      "rotation_signs": [1, -1, 1], "translation_signs": [1, 1, 1]
    },
    {"name": "carpus",  "proximal": "radius",  "distal": "cannon",  "translations_enabled": false},
    {"name": "fetlock", "proximal": "cannon",  "distal": "pastern", "translations_enabled": false},
    {"name": "coffin",  "proximal": "pastern", "distal": "hoof",    "translations_enabled": false}
  ]
}
)";
  return text;
}

LimbChain default_chain() { return build_chain(default_chain_config_text()); }

namespace {

Signal parse_signal(const json& j) {
  Signal s;
  s.offset = j.value("offset", 0.0);
  s.slope = j.value("slope", 0.0);
  if (j.contains("harmonics"))
    for (const auto& h : j["harmonics"]) {
      if (!h.is_array() || h.size() != 3)
        throw InputError("scenario: harmonic must be [amp, freq_hz, phase]");
      s.harmonics.push_back({h[0].get<double>(), h[1].get<double>(), h[2].get<double>()});
    }
  return s;
}

}  // namespace

SyntheticScenario parse_scenario(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario: ") + e.what());
  }

  if (doc.contains("trot")) {
    const auto& t = doc["trot"];
    TrotParams params;
    params.stance_fraction = t.value("stance_fraction", params.stance_fraction);
    params.stride_s = t.value("stride_s", params.stride_s);
    params.speed_mps = t.value("speed_mps", params.speed_mps);
    params.peak_vertical_per_kg = t.value("peak_vertical_per_kg", params.peak_vertical_per_kg);
    params.marker_rate_hz = t.value("marker_rate_hz", params.marker_rate_hz);
    params.grf_rate_hz = t.value("grf_rate_hz", params.grf_rate_hz);
    params.noise_sigma_m = t.value("noise_sigma_m", params.noise_sigma_m);
    params.seed = t.value("seed", params.seed);
    return synth_trot(params);
  }

  SyntheticScenario sc;
  if (doc.contains("chain") && doc["chain"].is_object())
    sc.chain = build_chain(doc["chain"].dump());
  else
    sc.chain = default_chain();
  sc.duration_s = doc.value("duration_s", sc.duration_s);
  sc.dt = doc.value("dt", sc.dt);
  sc.marker_rate_hz = doc.value("marker_rate_hz", sc.marker_rate_hz);
  sc.grf_rate_hz = doc.value("grf_rate_hz", sc.grf_rate_hz);
  sc.noise_sigma_m = doc.value("noise_sigma_m", sc.noise_sigma_m);
  sc.seed = doc.value("seed", sc.seed);
  sc.gravity = doc.value("gravity", sc.gravity);
  if (doc.contains("base_position")) {
    const auto& b = doc["base_position"];
    sc.base_position = Vec3(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>());
  }

  if (doc.contains("angles")) {
    AngleScript script;
    const auto& a = doc["angles"];
    script.joint_angles.resize(sc.chain.joints.size());
    if (a.contains("joints"))
      for (std::size_t j = 0; j < sc.chain.joints.size(); ++j) {
        const auto& name = sc.chain.joints[j].name;
        if (!a["joints"].contains(name)) continue;
        const auto& spec = a["joints"][name];
        if (spec.contains("alpha")) script.joint_angles[j][0] = parse_signal(spec["alpha"]);
        if (spec.contains("beta")) script.joint_angles[j][1] = parse_signal(spec["beta"]);
        if (spec.contains("gamma")) script.joint_angles[j][2] = parse_signal(spec["gamma"]);
      }
    if (a.contains("base")) {
      const char* axes[3] = {"x", "y", "z"};
      for (int k = 0; k < 3; ++k)
        if (a["base"].contains(axes[k]))
          script.base_position[std::size_t(k)] = parse_signal(a["base"][axes[k]]);
    }
    sc.angles = script;
  }
  if (doc.contains("torques")) {
    TorqueScript script;
    const auto& tq = doc["torques"];
    script.joint_torques.resize(sc.chain.joints.size());
    if (tq.contains("joints"))
      for (std::size_t j = 0; j < sc.chain.joints.size(); ++j) {
        const auto& name = sc.chain.joints[j].name;
        if (tq["joints"].contains(name))
          script.joint_torques[j] = parse_signal(tq["joints"][name]);
      }
    script.initial_angles = tq.value("initial_angles", std::vector<double>(sc.chain.joints.size(), 0.0));
    script.initial_rates = tq.value("initial_rates", std::vector<double>(sc.chain.joints.size(), 0.0));
    sc.torques = script;
  }
  if (doc.contains("grf")) {
    const auto& g = doc["grf"];
    GrfScript grf;
    grf.stance_begin_s = g.value("stance_begin_s", 0.0);
    grf.stance_end_s = g.value("stance_end_s", 0.0);
    grf.peak_vertical_n = g.value("peak_vertical_n", 0.0);
    grf.shape_power = g.value("shape_power", 1.0);
    grf.fore_aft_amp_n = g.value("fore_aft_amp_n", 0.0);
    grf.transverse_amp_n = g.value("transverse_amp_n", 0.0);
    if (g.contains("cop_start")) {
      const auto& c = g["cop_start"];
      grf.cop_start = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    }
    if (g.contains("cop_travel")) {
      const auto& c = g["cop_travel"];
      grf.cop_travel = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    }
    sc.grf = grf;
  }
  return sc;
}

SyntheticScenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace limbdyn
