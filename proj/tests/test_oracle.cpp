#include <doctest.h>

#include <cmath>
#include <numbers>

#include "limbdyn/oracle.hpp"

using namespace limbdyn;
using std::numbers::pi;

TEST_CASE("zero torques, zero gravity, zero initial velocity stays at rest") {
  SyntheticScenario sc;
  sc.chain = pendulum_chain({0.5, 0.4}, {2.0, 1.5});
  TorqueScript script;
  script.joint_torques.resize(2);
  script.initial_angles = {0.4, -0.3};
  script.initial_rates = {0.0, 0.0};
  sc.torques = script;
  sc.gravity = 0.0;
  sc.duration_s = 1.0;
  sc.dt = 1e-3;
  sc.marker_rate_hz = 100.0;
  const auto sim = simulate_forward(sc);
  for (std::size_t s = 0; s < sim.poses.poses.size(); ++s)
    for (std::size_t f = 0; f < sim.poses.times.size(); ++f) {
      CHECK((sim.poses.poses[s][f].rotation - sim.poses.poses[s][0].rotation)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
      CHECK((sim.poses.poses[s][f].translation - sim.poses.poses[s][0].translation)
                .norm() < 1e-12);
    }
}

TEST_CASE("released pendulum swings at the small-angle period") {
  SyntheticScenario sc;
  sc.chain = pendulum_chain({1.0}, {2.0});
  TorqueScript script;
  script.joint_torques.resize(1);
  script.initial_angles = {10.0 * pi / 180.0};
  script.initial_rates = {0.0};
  sc.torques = script;
  sc.duration_s = 4.0;
  sc.dt = 1e-4;
  sc.marker_rate_hz = 1000.0;
  const auto sim = simulate_forward(sc);

  // period from linearly interpolated zero crossings of the joint angle
  const auto& beta = sim.true_states.joints[0].angles;
  std::vector<double> crossings;
  for (std::size_t f = 1; f < sim.poses.times.size(); ++f) {
    const double a = beta[f - 1][1], b = beta[f][1];
    if (a == 0.0 || a * b >= 0.0) continue;
    const double u = a / (a - b);
    crossings.push_back(sim.poses.times[f - 1] +
                        u * (sim.poses.times[f] - sim.poses.times[f - 1]));
  }
  REQUIRE(crossings.size() >= 5);
  const double period = (crossings[4] - crossings[0]) / 2.0;
  // uniform rod pivoted at its end: T = 2 pi sqrt(2 L / (3 g))
  const double expected = 2.0 * pi * std::sqrt(2.0 * 1.0 / (3.0 * 9.81));
  CHECK(std::abs(period - expected) / expected < 0.01);
}

TEST_CASE("conservative double pendulum conserves energy to 1e-6") {
  SyntheticScenario sc;
  sc.chain = pendulum_chain({0.5, 0.4}, {2.0, 1.5});
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
  CHECK(drift / std::abs(e0) < 1e-6);
}

TEST_CASE("noise-free roundtrip recovers torques to 1e-3") {
  SyntheticScenario sc;
  sc.chain = pendulum_chain({0.5, 0.4}, {2.0, 1.5});
  TorqueScript script;
  script.joint_torques.resize(2);
  script.joint_torques[0].offset = 1.0;
  script.joint_torques[0].harmonics = {{3.0, 1.1, 0.4}};
  script.joint_torques[1].harmonics = {{1.5, 1.7, 1.2}};
  script.initial_angles = {0.3, -0.2};
  script.initial_rates = {0.0, 0.0};
  sc.torques = script;
  sc.duration_s = 1.0;
  sc.dt = 1e-4;
  sc.marker_rate_hz = 1000.0;
  const auto metrics = roundtrip_check(sc);
  CHECK(metrics.torque_max_rel < 1e-3);
  CHECK(metrics.force_max_rel < 1e-3);
  CHECK(metrics.rot_power_max_rel < 1e-3);
  CHECK(metrics.work_energy.residual_relative < 1e-3);
}

TEST_CASE("1 mm marker noise keeps filtered torque error under 10%") {
  auto sc = synth_trot();
  sc.noise_sigma_m = 1e-3;
  sc.seed = 12345;
  RoundtripOptions opt;
  opt.kin_cutoff_hz = 10.0;
  opt.grf_cutoff_hz = 50.0;
  // the zero-phase filter transient owns roughly the first/last quarter
  // second of a finite record; judge recovery on the interior window
  opt.edge_trim_frames = 30;
  const auto metrics = roundtrip_check(sc, opt);
  CHECK(metrics.torque_max_rel < 0.10);
}

TEST_CASE("static chain under a constant body-weight ground force") {
  SyntheticScenario sc;
  sc.chain = default_chain();
  AngleScript script;
  script.joint_angles.resize(sc.chain.joints.size());
  sc.angles = script;
  sc.duration_s = 0.5;
  sc.marker_rate_hz = 120.0;
  double chain_length = 0.0;
  for (const auto& s : sc.chain.segments) chain_length += s.length;
  sc.base_position = Vec3(0, 0, chain_length);  // hoof tip on the ground

  GrfScript grf;
  grf.stance_begin_s = -1.0;
  grf.stance_end_s = 10.0;
  grf.peak_vertical_n = sc.chain.body_mass * kGravity;
  grf.shape_power = 0.0;  // constant hump
  grf.cop_start = Vec3(0.01, 0.0, 0.0);
  sc.grf = grf;

  const auto metrics = roundtrip_check(sc);
  CHECK(metrics.force_max_rel < 1e-9);
}

TEST_CASE("trot scenario properties") {
  SUBCASE("defaults hit the configured stance fraction and peak") {
    const TrotParams params;
    const auto sc = synth_trot(params);
    const auto sim = simulate_forward(sc);
    const double threshold_n =
        params.contact_threshold_fraction * sc.chain.body_mass * kGravity;
    const auto phases = detect_stance(sim.grf, threshold_n);
    CHECK(phases.stance_fraction > 0.43);
    CHECK(phases.stance_fraction < 0.44);
    double peak = 0.0;
    for (const auto& f : sim.grf.force) peak = std::max(peak, f.z());
    CHECK(std::abs(peak / sc.chain.body_mass - 9.44) / 9.44 < 0.01);
  }
  SUBCASE("zero-amplitude oscillation gives a static limb with zero swing power") {
    TrotParams params;
    auto sc = synth_trot(params);
    for (auto& joint : sc.angles->joint_angles)
      for (auto& signal : joint) signal.harmonics.clear();
    sc.angles->base_position = {};  // no travel, no bob
    const auto sim = simulate_forward(sc);
    for (const auto& jp : sim.true_powers.joints)
      for (std::size_t f = 0; f < sim.poses.times.size(); ++f)
        CHECK(jp.total[f] == 0.0);

    const auto metrics = roundtrip_check(sc);
    for (const auto& ce : metrics.channels)
      if (ce.name.find("power") != std::string::npos) CHECK(ce.max_abs_error < 1e-9);
  }
  SUBCASE("parameter validation") {
    TrotParams params;
    params.stance_fraction = 1.2;
    CHECK_THROWS_AS(synth_trot(params), InputError);
    params.stance_fraction = 0.435;
    params.stride_s = -1.0;
    CHECK_THROWS_AS(synth_trot(params), InputError);
  }
}

TEST_CASE("scenario validation and stability") {
  SUBCASE("prescribing both angle and torque scripts is rejected") {
    SyntheticScenario sc;
    sc.chain = pendulum_chain({0.5}, {1.0});
    sc.angles = AngleScript{};
    sc.angles->joint_angles.resize(1);
    TorqueScript tq;
    tq.joint_torques.resize(1);
    tq.initial_angles = {0.0};
    tq.initial_rates = {0.0};
    sc.torques = tq;
    CHECK_THROWS_AS(simulate_forward(sc), InputError);
  }
  SUBCASE("prescribing neither is rejected") {
    SyntheticScenario sc;
    sc.chain = pendulum_chain({0.5}, {1.0});
    CHECK_THROWS_AS(simulate_forward(sc), InputError);
  }
  SUBCASE("an oversized step diverges with a numeric error") {
    SyntheticScenario sc;
    sc.chain = pendulum_chain({0.5, 0.4}, {2.0, 1.5});
    TorqueScript script;
    script.joint_torques.resize(2);
    script.joint_torques[0].offset = 60.0;  // constant spin-up
    script.initial_angles = {0.3, -0.2};
    script.initial_rates = {0.0, 0.0};
    sc.torques = script;
    sc.duration_s = 400.0;
    sc.dt = 0.25;
    sc.marker_rate_hz = 4.0;
    CHECK_THROWS_AS(simulate_forward(sc), NumericError);
  }
  SUBCASE("marker rate must divide the integration grid") {
    SyntheticScenario sc;
    sc.chain = pendulum_chain({0.5}, {1.0});
    TorqueScript script;
    script.joint_torques.resize(1);
    script.initial_angles = {0.1};
    script.initial_rates = {0.0};
    sc.torques = script;
    sc.dt = 1e-4;
    sc.marker_rate_hz = 120.0;  // 1/(120 * 1e-4) is not an integer
    CHECK_THROWS_AS(simulate_forward(sc), InputError);
  }
}

TEST_CASE("work-energy bookkeeping holds on a driven trot") {
  const auto sc = synth_trot();
  RoundtripOptions opt;
  const auto metrics = roundtrip_check(sc, opt);
  CHECK(metrics.work_energy.residual_relative < 1e-3);
}
