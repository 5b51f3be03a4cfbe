#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "limbdyn/pipeline.hpp"

namespace limbdyn {

namespace {

using std::numbers::pi;

struct ExpectedRow {
  const char* joint;
  AnatSymbol symbol;
  int sign;
};

// canonical 30-row coordinate convention, in model slot order
constexpr ExpectedRow kConventionFixture[30] = {
    {"elbow", AnatSymbol::Z, +1},   {"elbow", AnatSymbol::X, +1},
    {"elbow", AnatSymbol::Y, +1},   {"elbow", AnatSymbol::Beta, -1},
    {"elbow", AnatSymbol::Alpha, +1}, {"elbow", AnatSymbol::Gamma, -1},
    {"carpus", AnatSymbol::Z, -1},  {"carpus", AnatSymbol::Y, -1},
    {"carpus", AnatSymbol::X, -1},  {"carpus", AnatSymbol::Beta, -1},
    {"carpus", AnatSymbol::Alpha, +1}, {"carpus", AnatSymbol::Gamma, -1},
    {"fetlock", AnatSymbol::Z, -1}, {"fetlock", AnatSymbol::Y, -1},
    {"fetlock", AnatSymbol::X, -1}, {"fetlock", AnatSymbol::Beta, -1},
    {"fetlock", AnatSymbol::Alpha, +1}, {"fetlock", AnatSymbol::Gamma, -1},
    {"pastern", AnatSymbol::Z, -1}, {"pastern", AnatSymbol::Y, -1},
    {"pastern", AnatSymbol::X, -1}, {"pastern", AnatSymbol::Beta, -1},
    {"pastern", AnatSymbol::Alpha, +1}, {"pastern", AnatSymbol::Gamma, -1},
    {"coffin", AnatSymbol::Z, -1},  {"coffin", AnatSymbol::Y, -1},
    {"coffin", AnatSymbol::X, -1},  {"coffin", AnatSymbol::Beta, -1},
    {"coffin", AnatSymbol::Alpha, +1}, {"coffin", AnatSymbol::Gamma, -1},
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

SegmentPoseSeries constant_pose_series(const LimbChain& chain, const Mat3& rot0,
                                       std::size_t n_frames, double rate) {
  SegmentPoseSeries poses;
  poses.sample_rate = rate;
  for (std::size_t f = 0; f < n_frames; ++f) poses.times.push_back(double(f) / rate);
  poses.segment_names.push_back(chain.parent.name);
  poses.poses.push_back(std::vector<Pose>(n_frames));
  Vec3 origin = Vec3::Zero();
  for (const auto& seg : chain.segments) {
    Pose p;
    p.rotation = rot0;
    p.translation = origin;
    poses.segment_names.push_back(seg.name);
    poses.poses.push_back(std::vector<Pose>(n_frames, p));
    origin += rot0 * Vec3(0, 0, -seg.length);
  }
  return poses;
}

GrfSeries constant_grf(std::span<const double> times, const Vec3& force, const Vec3& cop) {
  GrfSeries grf;
  grf.times.assign(times.begin(), times.end());
  grf.sample_rate = times.size() > 1
                        ? double(times.size() - 1) / (times.back() - times.front())
                        : 0.0;
  grf.force.assign(times.size(), force);
  grf.cop.assign(times.size(), cop);
  grf.free_moment.assign(times.size(), 0.0);
  grf.cop_valid.assign(times.size(), force.z() > 0.0);
  return grf;
}

SyntheticScenario driven_double_pendulum(double duration) {
  SyntheticScenario sc;
  sc.chain = pendulum_chain({0.5, 0.4}, {2.0, 1.5}, 3.5);
  TorqueScript script;
  script.joint_torques.resize(2);
  script.joint_torques[0].offset = 1.0;
  script.joint_torques[0].harmonics = {{3.0, 1.1, 0.4}};
  script.joint_torques[1].harmonics = {{1.5, 1.7, 1.2}};
  script.initial_angles = {0.3, -0.2};
  script.initial_rates = {0.0, 0.0};
  sc.torques = script;
  sc.duration_s = duration;
  sc.dt = 1e-4;
  sc.marker_rate_hz = 1000.0;
  return sc;
}

LimbChain scaled_chain(LimbChain chain, double k) {
  chain.body_mass *= k;
  for (auto& s : chain.segments) {
    s.mass *= k;
    s.inertia *= k;
  }
  return chain;
}

}  // namespace

VerifyResult run_verify(const std::string& filter, const std::string& mutate) {
  using Check = std::pair<std::string, std::function<std::pair<bool, std::string>()>>;
  std::vector<Check> checks;

  checks.emplace_back("convention-table", [&]() -> std::pair<bool, std::string> {
    AnatomicalConvention conv =
        default_convention({"elbow", "carpus", "fetlock", "pastern", "coffin"});
    if (mutate == "table3-sign") conv.rows[3].coord_sign = +1;  // elbow flexion row
    for (int i = 0; i < 30; ++i) {
      const auto& row = conv.rows[std::size_t(i)];
      const auto& exp = kConventionFixture[i];
      if (row.joint != exp.joint || row.symbol != exp.symbol ||
          row.coord_sign != exp.sign || row.q_index != i + 1 ||
          row.torque_sign != exp.sign || row.power_sign != exp.sign)
        return {false, "row " + std::to_string(i + 1) + " (" + row.joint + " " +
                           anat_symbol_name(row.symbol) + ") does not match the fixture"};
    }
    return {true, "30 rows match"};
  });

  checks.emplace_back("sign-roundtrip", []() -> std::pair<bool, std::string> {
    const auto conv =
        default_convention({"elbow", "carpus", "fetlock", "pastern", "coffin"});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> q(30);
      for (auto& v : q) v = uni(rng);
      const auto back = from_anatomical(to_anatomical(q, conv), conv);
      if (back != q) return {false, "round-trip is not bit-exact"};
    }
    return {true, "200 random vectors bit-exact"};
  });

  checks.emplace_back("svd-fit", []() -> std::pair<bool, std::string> {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const std::vector<Vec3> tmpl = {Vec3(0.05, 0.01, -0.02), Vec3(-0.03, 0.05, -0.12),
                                    Vec3(0.02, -0.05, -0.25), Vec3(-0.05, -0.02, -0.33)};
    double worst_res = 0.0, worst_ang = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
      const Vec3 axis = Vec3(uni(rng), uni(rng), uni(rng)).normalized();
      const Mat3 rot = Eigen::AngleAxisd(uni(rng) * pi, axis).toRotationMatrix();
      const Vec3 t(uni(rng), uni(rng), uni(rng));
      std::vector<Vec3> obs;
      for (const auto& p : tmpl) obs.push_back(rot * p + t);
      const RigidFit fit = fit_rigid_transform(tmpl, obs);
      worst_res = std::max(worst_res, fit.residual_rms);
      worst_ang = std::max(
          worst_ang, Eigen::AngleAxisd(Mat3(fit.rotation.transpose() * rot)).angle());
    }
    if (worst_res > 1e-12) return {false, "residual " + fmt(worst_res) + " m"};
    if (worst_ang > 1e-9) return {false, "rotation error " + fmt(worst_ang) + " rad"};
    return {true, "500 rigid fits, residual <= " + fmt(worst_res) + " m"};
  });

  checks.emplace_back("decompose-roundtrip", []() -> std::pair<bool, std::string> {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double worst = 0.0;
    int kept = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      Eigen::Quaterniond q(uni(rng), uni(rng), uni(rng), uni(rng));
      if (q.norm() < 1e-3) continue;
      q.normalize();
      const Mat3 rot = q.toRotationMatrix();
      const RotationDecomposition d = decompose_rotation(rot);
      if (d.singular) continue;
      ++kept;
      const Mat3 back = compose_rotation(d.alpha, d.beta, d.gamma);
      worst = std::max(worst, (back - rot).cwiseAbs().maxCoeff());
    }
    if (worst > 1e-10)
      return {false, "round-trip error " + fmt(worst) + " over " + std::to_string(kept)};
    return {true, std::to_string(kept) + " rotations, max error " + fmt(worst)};
  });

  checks.emplace_back("differentiation", []() -> std::pair<bool, std::string> {
    const double rate = 120.0;
    std::vector<double> s(121), truth(121);
    for (int i = 0; i <= 120; ++i) {
      const double t = double(i) / rate;
      s[std::size_t(i)] = std::sin(2.0 * pi * t);
      truth[std::size_t(i)] = 2.0 * pi * std::cos(2.0 * pi * t);
    }
    const auto d = differentiate(s, 1.0 / rate);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
      worst = std::max(worst, std::abs(d[i] - truth[i]));
    if (worst > 1e-3) return {false, "max error " + fmt(worst) + " rad/s"};
    return {true, "max error " + fmt(worst) + " rad/s"};
  });

  checks.emplace_back("static-rod", []() -> std::pair<bool, std::string> {
    const LimbChain chain = pendulum_chain({1.0}, {2.0});
    const Mat3 horizontal =
        Eigen::AngleAxisd(-pi / 2.0, Vec3::UnitY()).toRotationMatrix();
    const auto poses = constant_pose_series(chain, horizontal, 9, 100.0);
    const auto spatial = segment_spatial_states(chain, poses, 0.0);
    const auto grf = constant_grf(poses.times, Vec3::Zero(), Vec3::Zero());
    const auto loads = inverse_dynamics(chain, spatial, grf);
    const Vec3 f = loads.joints[0].force_lab[4];
    const Vec3 m = loads.joints[0].moment_lab[4];
    if (std::abs(f.z() - 19.62) > 1e-9 || std::abs(f.x()) > 1e-9 || std::abs(f.y()) > 1e-9)
      return {false, "force " + fmt(f.z()) + " N"};
    if (std::abs(std::abs(m.y()) - 9.81) > 1e-9)
      return {false, "moment " + fmt(m.y()) + " N*m"};
    return {true, "19.62 N vertical, 9.81 N*m about y"};
  });

  checks.emplace_back("massless-transmission", []() -> std::pair<bool, std::string> {
    LimbChain chain = pendulum_chain({0.6, 0.5}, {1.0, 1.0});
    for (auto& s : chain.segments) {
      s.mass = 0.0;
      s.inertia.setZero();
    }
    const auto poses = constant_pose_series(chain, Mat3::Identity(), 9, 100.0);
    const Vec3 force(10.0, 5.0, 200.0);
    const Vec3 cop(0.12, 0.05, 0.0);
    const auto grf = constant_grf(poses.times, force, cop);
    const auto spatial = segment_spatial_states(chain, poses, 0.0);
    const auto loads = inverse_dynamics(chain, spatial, grf);
    for (std::size_t j = 0; j < chain.joints.size(); ++j) {
      const Vec3 jc = poses.poses[j + 1][4].translation;
      const Vec3 expect_m = (jc - cop).cross(force);
      if ((loads.joints[j].force_lab[4] + force).norm() > 1e-9)
        return {false, chain.joints[j].name + ": force not -F"};
      if ((loads.joints[j].moment_lab[4] - expect_m).norm() > 1e-9)
        return {false, chain.joints[j].name + ": moment mismatch"};
    }
    return {true, "force and lever-arm moments transmitted exactly"};
  });

  checks.emplace_back("pendulum-roundtrip", []() -> std::pair<bool, std::string> {
    const auto metrics = roundtrip_check(driven_double_pendulum(1.0));
    const double worst = std::max({metrics.torque_max_rel, metrics.force_max_rel,
                                   metrics.rot_power_max_rel});
    if (worst > 1e-3) return {false, "max relative error " + fmt(worst)};
    return {true, "torque/force/power within " + fmt(worst)};
  });

  checks.emplace_back("work-energy", []() -> std::pair<bool, std::string> {
    const auto metrics = roundtrip_check(driven_double_pendulum(1.0));
    if (metrics.work_energy.residual_relative > 1e-3)
      return {false, "residual " + fmt(metrics.work_energy.residual_relative)};
    return {true, "residual " + fmt(metrics.work_energy.residual_relative)};
  });

  checks.emplace_back("energy-conservation", []() -> std::pair<bool, std::string> {
    SyntheticScenario sc;
    sc.chain = pendulum_chain({0.5, 0.4}, {2.0, 1.5}, 3.5);
    TorqueScript script;
    script.joint_torques.resize(2);
    script.initial_angles = {0.5, 0.3};
    script.initial_rates = {0.0, 0.0};
    sc.torques = script;
    sc.duration_s = 2.0;
    sc.dt = 1e-4;
    sc.marker_rate_hz = 1000.0;
    const auto sim = simulate_forward(sc);
    const double e0 = sim.mechanical_energy.front();
    double drift = 0.0;
    for (double e : sim.mechanical_energy) drift = std::max(drift, std::abs(e - e0));
    const double rel = drift / std::abs(e0);
    if (rel > 1e-6) return {false, "drift " + fmt(rel)};
    return {true, "relative drift " + fmt(rel)};
  });

  checks.emplace_back("trot-shape", []() -> std::pair<bool, std::string> {
    const TrotParams params;
    const auto sc = synth_trot(params);
    const auto sim = simulate_forward(sc);
    const double threshold_n =
        params.contact_threshold_fraction * sc.chain.body_mass * kGravity;
    const auto phases = detect_stance(sim.grf, threshold_n);
    if (std::abs(phases.stance_fraction - 0.435) > 0.015)
      return {false, "stance fraction " + fmt(phases.stance_fraction)};

    RoundtripOptions opt;
    opt.kin_cutoff_hz = 0.0;
    opt.grf_cutoff_hz = 50.0;
    const auto poses = segment_poses(sc.chain, sim.markers);
    const auto spatial = segment_spatial_states(sc.chain, poses, 0.0);
    const auto grf = resample_grf(sim.grf, poses.times, 50.0, threshold_n);
    double peak = 0.0;
    for (std::size_t f = 0; f < grf.times.size(); ++f)
      peak = std::max(peak, grf.force[f].z() / sc.chain.body_mass);
    if (std::abs(peak - params.peak_vertical_per_kg) > 0.01 * params.peak_vertical_per_kg)
      return {false, "GRF peak " + fmt(peak) + " N/kg"};

    const auto loads = inverse_dynamics(sc.chain, spatial, grf);
    for (std::size_t j = 0; j < sc.chain.joints.size(); ++j) {
      double stance_peak = 0.0, swing_peak = 0.0;
      for (std::size_t f = 0; f < grf.times.size(); ++f) {
        const double mag = loads.joints[j].force_lab[f].norm();
        const double t = grf.times[f];
        if (t >= phases.stance_begin && t <= phases.stance_end)
          stance_peak = std::max(stance_peak, mag);
        else
          swing_peak = std::max(swing_peak, mag);
      }
      if (stance_peak < 5.0 * swing_peak)
        return {false, sc.chain.joints[j].name + ": stance/swing ratio " +
                           fmt(stance_peak / swing_peak)};
    }
    return {true, "stance " + fmt(phases.stance_fraction * 100.0) + "%, GRF peak " +
                      fmt(peak) + " N/kg, contrast >= 5x"};
  });

  checks.emplace_back("normalization-invariance", []() -> std::pair<bool, std::string> {
    TrotParams params;
    const auto sc = synth_trot(params);
    const auto sim = simulate_forward(sc);
    const double k = 7.0;
    const LimbChain big = scaled_chain(sc.chain, k);
    const double threshold_n = 0.02 * sc.chain.body_mass * kGravity;

    const auto poses = segment_poses(sc.chain, sim.markers);
    const auto spatial_small = segment_spatial_states(sc.chain, poses, 0.0);
    const auto spatial_big = segment_spatial_states(big, poses, 0.0);
    auto grf_small = resample_grf(sim.grf, poses.times, 0.0, threshold_n);
    auto grf_big = grf_small;
    for (auto& f : grf_big.force) f *= k;
    const auto loads_small = inverse_dynamics(sc.chain, spatial_small, grf_small);
    const auto loads_big = inverse_dynamics(big, spatial_big, grf_big);
    double worst = 0.0;
    for (std::size_t j = 0; j < sc.chain.joints.size(); ++j)
      for (std::size_t f = 0; f < poses.times.size(); ++f) {
        worst = std::max(worst, (loads_small.joints[j].force_per_kg[f] -
                                 loads_big.joints[j].force_per_kg[f])
                                    .cwiseAbs()
                                    .maxCoeff());
        worst = std::max(worst, (loads_small.joints[j].moment_per_kg[f] -
                                 loads_big.joints[j].moment_per_kg[f])
                                    .cwiseAbs()
                                    .maxCoeff());
      }
    if (worst > 1e-9) return {false, "per-kg deviation " + fmt(worst)};
    return {true, "per-kg outputs invariant to " + fmt(worst)};
  });

  VerifyResult result;
  bool any_matched = false;
  for (auto& [name, fn] : checks) {
    if (!filter.empty() && name.find(filter) == std::string::npos) {
      ++result.skipped;
      continue;
    }
    any_matched = true;
    std::pair<bool, std::string> outcome;
    try {
      outcome = fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    result.lines.push_back(std::string(outcome.first ? "PASS " : "FAIL ") + name + ": " +
                           outcome.second);
    if (outcome.first)
      ++result.passed;
    else
      ++result.failed;
  }
  if (!any_matched)
    result.lines.push_back("WARN no checks matched filter '" + filter + "'");
  return result;
}

}  // namespace limbdyn
