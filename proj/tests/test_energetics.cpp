#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "limbdyn/energetics.hpp"
#include "limbdyn/oracle.hpp"

using namespace limbdyn;
using std::numbers::pi;

namespace {

// Reference per-joint, per-phase energies (J/kg) used as a fixture across
// the fraction tests: generated, absorbed for stance then swing.
struct EnergyFixtureRow {
  const char* joint;
  double gen_stance, abs_stance, net_stance;
  double gen_swing, abs_swing, net_swing;
};
const EnergyFixtureRow kEnergyFixture[5] = {
    {"elbow", 1.3325, -0.4154, 0.9171, 0.1234, -0.5207, -0.3973},
    {"carpus", 0.0698, -0.0351, 0.0348, 0.0974, -0.0071, 0.0903},
    {"fetlock", 0.2266, -0.1664, 0.0603, 0.0171, -0.0021, 0.0150},
    {"pastern", 0.0214, -0.0207, 0.0007, 0.0008, -0.0005, 0.0003},
    {"coffin", 0.0414, -0.0425, -0.0010, 0.0010, -0.0007, 0.0003},
};

EnergyTable fixture_table() {
  EnergyTable table;
  for (const auto& row : kEnergyFixture) {
    JointEnergy je;
    je.joint = row.joint;
    je.stance = {row.gen_stance, row.abs_stance, row.gen_stance + row.abs_stance};
    je.swing = {row.gen_swing, row.abs_swing, row.gen_swing + row.abs_swing};
    table.joints.push_back(je);
    table.stance_total.generated += je.stance.generated;
    table.stance_total.absorbed += je.stance.absorbed;
    table.stance_total.net += je.stance.net;
    table.swing_total.generated += je.swing.generated;
    table.swing_total.absorbed += je.swing.absorbed;
    table.swing_total.net += je.swing.net;
  }
  return table;
}

JointPowerSeries single_joint_power(std::vector<double> times,
                                    std::vector<double> watts_per_kg) {
  JointPowerSeries p;
  p.times = std::move(times);
  p.sample_rate = p.times.size() > 1
                      ? double(p.times.size() - 1) / (p.times.back() - p.times.front())
                      : 0.0;
  JointPower jp;
  jp.joint = "joint0";
  const std::size_t n = p.times.size();
  jp.rotational.assign(n, Vec3::Zero());
  jp.translational.assign(n, Vec3::Zero());
  jp.total.assign(n, 0.0);
  jp.rotational_per_kg.assign(n, Vec3::Zero());
  jp.translational_per_kg.assign(n, Vec3::Zero());
  jp.total_per_kg.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    jp.rotational_per_kg[i][1] = watts_per_kg[i];
    jp.rotational[i][1] = watts_per_kg[i];
    jp.total[i] = watts_per_kg[i];
    jp.total_per_kg[i] = watts_per_kg[i];
  }
  p.joints.push_back(std::move(jp));
  return p;
}

}  // namespace

TEST_CASE("joint power definition") {
  LimbChain chain = pendulum_chain({0.5}, {1.0});
  chain.joints[0].translations_enabled = false;

  NetJointLoadSeries loads;
  loads.times = {0.0, 0.01, 0.02};
  loads.sample_rate = 100.0;
  JointLoad jl;
  jl.joint = "joint0";
  jl.moment.assign(3, Vec3(0, 2.0, 0));
  jl.force.assign(3, Vec3(5.0, 0, 0));
  jl.moment_per_kg.assign(3, Vec3(0, 2.0, 0));
  jl.force_per_kg.assign(3, Vec3(5.0, 0, 0));
  jl.moment_lab.assign(3, Vec3(0, 2.0, 0));
  jl.force_lab.assign(3, Vec3(5.0, 0, 0));
  loads.joints.push_back(jl);

  JointStateSeries states;
  states.times = loads.times;
  states.sample_rate = 100.0;
  JointState js;
  js.joint = "joint0";
  js.angles.assign(3, Vec3::Zero());
  js.angle_rates.assign(3, Vec3::Zero());
  js.angle_accels.assign(3, Vec3::Zero());
  js.trans.assign(3, Vec3::Zero());
  js.trans_rates.assign(3, Vec3(0.7, 0, 0));
  js.trans_accels.assign(3, Vec3::Zero());
  js.ang_vel.assign(3, Vec3(0, 3.0, 0));
  js.ang_acc.assign(3, Vec3::Zero());
  js.valid.assign(3, true);
  states.joints.push_back(js);

  SUBCASE("aligned moment and angular velocity generate +6 W") {
    const auto power = joint_power(chain, loads, states);
    CHECK(power.joints[0].rotational[0][1] == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(power.joints[0].total[0] == doctest::Approx(6.0).epsilon(1e-15));
  }
  SUBCASE("opposing moment absorbs -6 W") {
    for (auto& w : states.joints[0].ang_vel) w = Vec3(0, -3.0, 0);
    const auto power = joint_power(chain, loads, states);
    CHECK(power.joints[0].rotational[0][1] == doctest::Approx(-6.0).epsilon(1e-15));
  }
  SUBCASE("disabled translations contribute exactly zero power") {
    const auto power = joint_power(chain, loads, states);
    for (int f = 0; f < 3; ++f)
      CHECK(power.joints[0].translational[std::size_t(f)].norm() == 0.0);
  }
  SUBCASE("enabled translations use force times translational velocity") {
    chain.joints[0].translations_enabled = true;
    const auto power = joint_power(chain, loads, states);
    CHECK(power.joints[0].translational[0][0] == doctest::Approx(3.5).epsilon(1e-15));
    CHECK(power.joints[0].total[0] == doctest::Approx(9.5).epsilon(1e-15));
  }
  SUBCASE("per-axis product is recomputable to 1e-12") {
    const auto power = joint_power(chain, loads, states);
    for (std::size_t f = 0; f < 3; ++f)
      for (int k = 0; k < 3; ++k)
        CHECK(std::abs(power.joints[0].rotational[f][k] -
                       loads.joints[0].moment[f][k] * states.joints[0].ang_vel[f][k]) <
              1e-12);
  }
}

TEST_CASE("energy integration") {
  SUBCASE("constant 6 W over 0.5 s gives 3 J generated") {
    std::vector<double> times, watts;
    for (int i = 0; i <= 50; ++i) {
      times.push_back(i * 0.01);
      watts.push_back(6.0);
    }
    const auto power = single_joint_power(times, watts);
    PhaseEvents phases{0.0, 0.5, 0.0, 0.5, 1.0};
    const auto energy = integrate_energy(power, phases);
    CHECK(energy.combined.joints[0].stance.generated == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(energy.combined.joints[0].stance.absorbed == 0.0);
    CHECK(energy.combined.joints[0].stance.net == doctest::Approx(3.0).epsilon(1e-12));
  }

  SUBCASE("sine power over one period splits into +-1/pi") {
    std::vector<double> times, watts;
    const int n = 2000;
    for (int i = 0; i <= n; ++i) {
      const double t = double(i) / n;
      times.push_back(t);
      watts.push_back(std::sin(2 * pi * t));
    }
    const auto power = single_joint_power(times, watts);
    PhaseEvents phases{0.0, 1.0, 0.0, 1.0, 1.0};
    const auto energy = integrate_energy(power, phases);
    CHECK(std::abs(energy.combined.joints[0].stance.generated - 1.0 / pi) < 1e-4);
    CHECK(std::abs(energy.combined.joints[0].stance.absorbed + 1.0 / pi) < 1e-4);
    CHECK(std::abs(energy.combined.joints[0].stance.net) < 1e-4);
  }

  SUBCASE("zero power gives all zeros") {
    std::vector<double> times(11), watts(11, 0.0);
    for (int i = 0; i <= 10; ++i) times[std::size_t(i)] = i * 0.1;
    const auto energy =
        integrate_energy(single_joint_power(times, watts), PhaseEvents{0, 1, 0.2, 0.6, 0.4});
    CHECK(energy.combined.joints[0].stance.generated == 0.0);
    CHECK(energy.combined.joints[0].swing.net == 0.0);
  }

  SUBCASE("stance plus swing equals the full stride to 1e-12") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    std::vector<double> times, watts;
    for (int i = 0; i <= 137; ++i) {
      times.push_back(i * 0.005);
      watts.push_back(uni(rng));
    }
    const auto power = single_joint_power(times, watts);
    const PhaseEvents phases{times.front(), times.back(), 0.1234, 0.4321, 0.45};
    const auto energy = integrate_energy(power, phases);
    const PhaseEvents whole{times.front(), times.back(), times.front(), times.back(), 1.0};
    const auto full = integrate_energy(power, whole);
    const auto& joint = energy.combined.joints[0];
    CHECK(joint.stance.generated + joint.swing.generated ==
          doctest::Approx(full.combined.joints[0].stance.generated).epsilon(1e-12));
    CHECK(joint.stance.absorbed + joint.swing.absorbed ==
          doctest::Approx(full.combined.joints[0].stance.absorbed).epsilon(1e-12));
    CHECK(joint.stance.generated + joint.stance.absorbed ==
          doctest::Approx(joint.stance.net).epsilon(1e-12));
  }

  SUBCASE("phase boundaries outside the sampled span are rejected") {
    std::vector<double> times(11), watts(11, 1.0);
    for (int i = 0; i <= 10; ++i) times[std::size_t(i)] = i * 0.1;
    CHECK_THROWS_AS(integrate_energy(single_joint_power(times, watts),
                                     PhaseEvents{0.0, 2.0, 0.5, 1.5, 0.5}),
                    InputError);
  }

  SUBCASE("scaling power scales energies linearly") {
    std::vector<double> times, watts;
    for (int i = 0; i <= 100; ++i) {
      times.push_back(i * 0.01);
      watts.push_back(std::sin(2 * pi * i * 0.01) + 0.3);
    }
    const double k = 4.5;
    std::vector<double> scaled(watts);
    for (auto& w : scaled) w *= k;
    PhaseEvents phases{0, 1, 0.2, 0.7, 0.5};
    const auto e1 = integrate_energy(single_joint_power(times, watts), phases);
    const auto e2 = integrate_energy(single_joint_power(times, scaled), phases);
    CHECK(e2.combined.joints[0].stance.generated ==
          doctest::Approx(k * e1.combined.joints[0].stance.generated).epsilon(1e-12));
    CHECK(e2.combined.joints[0].swing.absorbed ==
          doctest::Approx(k * e1.combined.joints[0].swing.absorbed).epsilon(1e-12));
  }
}

TEST_CASE("energy fractions reproduce the reference shares") {
  const FractionTable f = energy_fractions(fixture_table());

  // elbow share of stance generation: 1.3325 / 1.6917 = 79%
  REQUIRE(f.gen_stance[0].has_value());
  CHECK(*f.gen_stance[0] * 100.0 == doctest::Approx(79.0).epsilon(0.013));
  // stance share of all generation: 1.6917 / (1.6917 + 0.2397) = 88%
  REQUIRE(f.gen_stance_phase.has_value());
  CHECK(*f.gen_stance_phase * 100.0 == doctest::Approx(88.0).epsilon(0.012));
  // stance share of all absorption: 56%
  REQUIRE(f.abs_stance_phase.has_value());
  CHECK(*f.abs_stance_phase * 100.0 == doctest::Approx(56.0).epsilon(0.012));

  SUBCASE("joint shares sum to one within rounding") {
    double gen_stance_sum = 0.0, abs_swing_sum = 0.0;
    for (std::size_t j = 0; j < f.joints.size(); ++j) {
      gen_stance_sum += f.gen_stance[j].value();
      abs_swing_sum += f.abs_swing[j].value();
    }
    CHECK(gen_stance_sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(abs_swing_sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("energy fractions edge cases") {
  SUBCASE("single joint, single phase takes 100%") {
    EnergyTable table;
    JointEnergy je;
    je.joint = "only";
    je.stance = {2.0, -0.5, 1.5};
    je.swing = {0.0, 0.0, 0.0};
    table.joints.push_back(je);
    table.stance_total = je.stance;
    table.swing_total = je.swing;
    const auto f = energy_fractions(table);
    CHECK(*f.gen_stance[0] == doctest::Approx(1.0));
    CHECK(*f.gen_stance_phase == doctest::Approx(1.0));
  }
  SUBCASE("zero category totals report undefined, not NaN") {
    EnergyTable table;
    JointEnergy je;
    je.joint = "only";
    table.joints.push_back(je);
    const auto f = energy_fractions(table);
    CHECK_FALSE(f.gen_stance[0].has_value());
    CHECK_FALSE(f.abs_swing_phase.has_value());
  }
}

TEST_CASE("time normalization") {
  SUBCASE("linear ramp resamples exactly") {
    std::vector<double> times, values;
    for (int i = 0; i <= 30; ++i) {
      times.push_back(0.2 + i * 0.01);
      values.push_back(5.0 - 2.0 * (0.2 + i * 0.01));
    }
    const auto ns = time_normalize(values, times, 101);
    for (int i = 0; i <= 100; ++i) {
      const double t = 0.2 + 0.3 * i / 100.0;
      CHECK(ns.values[std::size_t(i)] == doctest::Approx(5.0 - 2.0 * t).epsilon(1e-9));
    }
  }
  SUBCASE("endpoints are preserved bit-exactly") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(-10.0, 10.0);
    std::vector<double> times, values;
    for (int i = 0; i <= 57; ++i) {
      times.push_back(i * 0.013);
      values.push_back(uni(rng));
    }
    const auto ns = time_normalize(values, times, 101);
    CHECK(ns.values.front() == values.front());
    CHECK(ns.values.back() == values.back());
  }
  SUBCASE("sine sampled at 85 points stays within 1e-3 of analytic") {
    std::vector<double> times, values;
    for (int i = 0; i < 85; ++i) {
      const double t = double(i) / 84.0;
      times.push_back(t);
      values.push_back(std::sin(2 * pi * t));
    }
    const auto ns = time_normalize(values, times, 101);
    double worst = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double t = double(i) / 100.0;
      worst = std::max(worst, std::abs(ns.values[std::size_t(i)] - std::sin(2 * pi * t)));
    }
    CHECK(worst < 1e-3);
  }
  SUBCASE("integral is preserved within 0.5% for band-limited input") {
    std::vector<double> times, values;
    const int n = 85;
    for (int i = 0; i < n; ++i) {
      const double t = double(i) / double(n - 1) * 0.7;
      times.push_back(t);
      values.push_back(2.0 + std::sin(2 * pi * 1.4 * t) + 0.5 * std::sin(2 * pi * 3.1 * t));
    }
    const auto ns = time_normalize(values, times, 101);
    auto trapz = [](std::span<const double> y, double dx) {
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < y.size(); ++i) s += 0.5 * (y[i] + y[i + 1]) * dx;
      return s;
    };
    const double original = trapz(values, 0.7 / double(n - 1));
    const double resampled = trapz(ns.values, 0.7 / 100.0);
    CHECK(std::abs(resampled - original) / std::abs(original) < 0.005);
  }
  SUBCASE("phase boundary maps to its percent index") {
    std::vector<double> times, values;
    for (int i = 0; i <= 10; ++i) {
      times.push_back(i * 0.1);
      values.push_back(double(i));
    }
    const auto ns = time_normalize(values, times, 101, 0.435);
    CHECK(ns.boundary_index == 44);
  }
  SUBCASE("fewer than 4 samples rejected") {
    std::vector<double> times{0.0, 0.1, 0.2}, values{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(time_normalize(values, times, 101), InputError);
  }
}

TEST_CASE("aggregation") {
  SUBCASE("identical trials have zero sd") {
    NormalizedSeries a{{1.0, 2.0, 3.0}, 0};
    const auto agg = aggregate(std::vector<NormalizedSeries>{a, a, a});
    for (double v : agg.sd) CHECK(v == 0.0);
    CHECK(agg.mean[1] == 2.0);
    CHECK_FALSE(agg.single_trial);
  }
  SUBCASE("single trial is flagged with zero sd") {
    NormalizedSeries a{{1.0, 2.0}, 0};
    const auto agg = aggregate(std::vector<NormalizedSeries>{a});
    CHECK(agg.single_trial);
    CHECK(agg.sd[0] == 0.0);
  }
  SUBCASE("two values 1 and 3 give mean 2, sd sqrt(2)") {
    const std::vector<double> values{1.0, 3.0};
    const auto s = aggregate(values);
    CHECK(s.mean == doctest::Approx(2.0));
    CHECK(s.sd == doctest::Approx(std::sqrt(2.0)));
  }
  SUBCASE("sample mean of 1000 normal draws lands near the population mean") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> dist(5.0, 2.0);
    std::vector<double> values(1000);
    for (auto& v : values) v = dist(rng);
    const auto s = aggregate(values);
    CHECK(std::abs(s.mean - 5.0) < 4.0 * 2.0 / std::sqrt(1000.0));
    CHECK(s.sd == doctest::Approx(2.0).epsilon(0.15));
  }
  SUBCASE("grid mismatch rejected") {
    NormalizedSeries a{{1.0, 2.0}, 0}, b{{1.0, 2.0, 3.0}, 0};
    CHECK_THROWS_AS(aggregate(std::vector<NormalizedSeries>{a, b}), InputError);
  }
}

TEST_CASE("extrema extraction") {
  SUBCASE("reference torque curve fixture lands on the published extrema") {
    // compact-support bumps centered exactly on the expected grid indices
    NormalizedSeries curve;
    curve.values.assign(101, 0.0);
    auto bump = [&](int center, double amp, double width) {
      for (int i = 0; i <= 100; ++i) {
        const double u = (i - center) / width;
        if (std::abs(u) < 1.0)
          curve.values[std::size_t(i)] +=
              amp * std::exp(1.0 - 1.0 / (1.0 - u * u));  // C-inf bump, peak = amp
      }
    };
    bump(78, 0.8597, 18.0);
    bump(14, -0.6863, 10.0);
    const auto r = extrema(curve, 0, 100);
    CHECK(r.max_value == doctest::Approx(0.8597).epsilon(1e-9));
    CHECK(r.max_percent == doctest::Approx(78.0).epsilon(1e-12));
    CHECK(r.min_value == doctest::Approx(-0.6863).epsilon(1e-9));
    CHECK(r.min_percent == doctest::Approx(14.0).epsilon(1e-12));
  }
  SUBCASE("constant series ties break at the window start") {
    NormalizedSeries curve;
    curve.values.assign(51, 1.25);
    const auto r = extrema(curve, 0, 50);
    CHECK(r.max_value == 1.25);
    CHECK(r.min_value == 1.25);
    CHECK(r.max_percent == 0.0);
    CHECK(r.min_percent == 0.0);
  }
  SUBCASE("negated sine has min at 25% and max at 75%") {
    NormalizedSeries curve;
    for (int i = 0; i <= 100; ++i)
      curve.values.push_back(-std::sin(2 * pi * i / 100.0));
    const auto r = extrema(curve, 0, 100);
    CHECK(r.min_percent == doctest::Approx(25.0));
    CHECK(r.max_percent == doctest::Approx(75.0));
  }
  SUBCASE("empty window rejected") {
    NormalizedSeries curve;
    curve.values.assign(10, 0.0);
    CHECK_THROWS_AS(extrema(curve, 5, 4), InputError);
    CHECK_THROWS_AS(extrema(curve, 0, 10), InputError);
  }
}
