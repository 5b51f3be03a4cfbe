#include "limbdyn/energetics.hpp"

#include <algorithm>
#include <cmath>

#include "limbdyn/spline.hpp"

namespace limbdyn {

const JointPower& JointPowerSeries::of(const std::string& joint) const {
  for (const auto& j : joints)
    if (j.joint == joint) return j;
  throw InputError("unknown joint in power series: " + joint);
}

JointPowerSeries joint_power(const LimbChain& chain,
                             const NetJointLoadSeries& loads,
                             const JointStateSeries& states) {
  const std::size_t n = loads.times.size();
  if (states.times.size() != n)
    throw InputError("joint_power: load and state series are not aligned");

  JointPowerSeries out;
  out.sample_rate = loads.sample_rate;
  out.times = loads.times;
  for (const auto& joint : chain.joints) {
    const JointLoad& load = loads.of(joint.name);
    const JointState& st = states.of(joint.name);
    JointPower p;
    p.joint = joint.name;
    p.rotational.resize(n);
    p.translational.resize(n);
    p.total.resize(n);
    p.rotational_per_kg.resize(n);
    p.translational_per_kg.resize(n);
    p.total_per_kg.resize(n);
    for (std::size_t f = 0; f < n; ++f) {
      p.rotational[f] = load.moment[f].cwiseProduct(st.ang_vel[f]);
      p.translational[f] = joint.translations_enabled
                               ? Vec3(load.force[f].cwiseProduct(st.trans_rates[f]))
                               : Vec3::Zero();
      p.total[f] = p.rotational[f].sum() + p.translational[f].sum();
      p.rotational_per_kg[f] = p.rotational[f] / chain.body_mass;
      p.translational_per_kg[f] = p.translational[f] / chain.body_mass;
      p.total_per_kg[f] = p.total[f] / chain.body_mass;
    }
    out.joints.push_back(std::move(p));
  }
  return out;
}

namespace {

// Trapezoid of the sample-clipped series over [a, b], with linear
// interpolation at the window edges. Splitting a window at any interior
// point is exactly additive.
struct SplitIntegral {
  double positive = 0.0, negative = 0.0;
};

SplitIntegral integrate_window(std::span<const double> p, std::span<const double> t,
                               double a, double b) {
  SplitIntegral s;
  if (!(b > a)) return s;
  const std::size_t n = t.size();
  // integrate the linear interpolants of the clipped samples; window splits
  // then stay exactly additive
  auto lerp_channel = [&](double x, std::size_t i, bool positive) {
    const double u = (x - t[i]) / (t[i + 1] - t[i]);
    const double lo = positive ? std::max(p[i], 0.0) : std::min(p[i], 0.0);
    const double hi = positive ? std::max(p[i + 1], 0.0) : std::min(p[i + 1], 0.0);
    return (1.0 - u) * lo + u * hi;
  };
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double lo = std::max(a, t[i]);
    const double hi = std::min(b, t[i + 1]);
    if (!(hi > lo)) continue;
    s.positive += 0.5 * (lerp_channel(lo, i, true) + lerp_channel(hi, i, true)) * (hi - lo);
    s.negative += 0.5 * (lerp_channel(lo, i, false) + lerp_channel(hi, i, false)) * (hi - lo);
  }
  return s;
}

PhaseEnergy phase_energy(std::span<const double> p, std::span<const double> t,
                         double a, double b) {
  const SplitIntegral s = integrate_window(p, t, a, b);
  return PhaseEnergy{s.positive, s.negative, s.positive + s.negative};
}

PhaseEnergy add(const PhaseEnergy& x, const PhaseEnergy& y) {
  return PhaseEnergy{x.generated + y.generated, x.absorbed + y.absorbed, x.net + y.net};
}

}  // namespace

EnergySummary integrate_energy(const JointPowerSeries& power, const PhaseEvents& phases) {
  const auto& t = power.times;
  if (t.empty()) throw InputError("integrate_energy: empty power series");
  const double eps = 1e-9 * std::max(1.0, std::abs(t.back()));
  if (phases.stance_begin < phases.stride_begin - eps ||
      phases.stance_end > phases.stride_end + eps ||
      phases.stride_begin < t.front() - eps || phases.stride_end > t.back() + eps)
    throw InputError("integrate_energy: phase boundaries outside the sampled span");

  const double sb = std::clamp(phases.stance_begin, t.front(), t.back());
  const double se = std::clamp(phases.stance_end, t.front(), t.back());
  const double rb = std::clamp(phases.stride_begin, t.front(), t.back());
  const double re = std::clamp(phases.stride_end, t.front(), t.back());

  EnergySummary out;
  const std::size_t n = t.size();
  for (const auto& jp : power.joints) {
    std::array<std::vector<double>, 6> axis;  // per-kg channels
    for (auto& a : axis) a.resize(n);
    std::vector<double> rot(n), trans(n), comb(n);
    for (std::size_t f = 0; f < n; ++f) {
      for (int k = 0; k < 3; ++k) {
        axis[k][f] = jp.rotational_per_kg[f][k];
        axis[3 + k][f] = jp.translational_per_kg[f][k];
      }
      rot[f] = jp.rotational_per_kg[f].sum();
      trans[f] = jp.translational_per_kg[f].sum();
      comb[f] = rot[f] + trans[f];
    }

    auto per_phase = [&](std::span<const double> p) {
      JointEnergy je;
      je.joint = jp.joint;
      je.stance = phase_energy(p, t, sb, se);
      je.swing = add(phase_energy(p, t, rb, sb), phase_energy(p, t, se, re));
      return je;
    };
    out.rotational.joints.push_back(per_phase(rot));
    out.translational.joints.push_back(per_phase(trans));
    out.combined.joints.push_back(per_phase(comb));

    std::array<PhaseEnergy, 6> pa;  // full-stride energies per channel
    for (int k = 0; k < 6; ++k) {
      const JointEnergy je = per_phase(axis[k]);
      pa[k] = add(je.stance, je.swing);
    }
    out.per_axis.push_back(pa);
  }

  auto totals = [](EnergyTable& table) {
    for (const auto& je : table.joints) {
      table.stance_total = add(table.stance_total, je.stance);
      table.swing_total = add(table.swing_total, je.swing);
    }
  };
  totals(out.rotational);
  totals(out.translational);
  totals(out.combined);
  return out;
}

namespace {

std::optional<double> share(double value, double total) {
  if (std::abs(total) < 1e-15) return std::nullopt;
  return std::abs(value) / std::abs(total);
}

}  // namespace

FractionTable energy_fractions(const EnergyTable& table) {
  FractionTable out;
  const double gs = table.stance_total.generated, gw = table.swing_total.generated;
  const double as = table.stance_total.absorbed, aw = table.swing_total.absorbed;
  for (const auto& je : table.joints) {
    out.joints.push_back(je.joint);
    out.gen_stance.push_back(share(je.stance.generated, gs));
    out.gen_swing.push_back(share(je.swing.generated, gw));
    out.abs_stance.push_back(share(je.stance.absorbed, as));
    out.abs_swing.push_back(share(je.swing.absorbed, aw));
  }
  out.gen_stance_phase = share(gs, gs + gw);
  out.gen_swing_phase = share(gw, gs + gw);
  out.abs_stance_phase = share(as, as + aw);
  out.abs_swing_phase = share(aw, as + aw);
  return out;
}

FractionTables energy_fractions(const EnergySummary& summary) {
  return FractionTables{energy_fractions(summary.rotational),
                        energy_fractions(summary.translational),
                        energy_fractions(summary.combined)};
}

NormalizedSeries time_normalize(std::span<const double> values,
                                std::span<const double> times,
                                int n_points,
                                std::optional<double> boundary_time) {
  if (values.size() != times.size()) throw InputError("time_normalize: size mismatch");
  if (values.size() < 4) throw InputError("time_normalize: needs at least 4 samples");
  if (n_points < 2) throw InputError("time_normalize: grid needs at least 2 points");
  CubicSpline spline(times, values);
  const double t0 = times.front(), t1 = times.back();
  NormalizedSeries out;
  out.values.resize(std::size_t(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double t = i == 0 ? t0
                   : i == n_points - 1 ? t1
                   : t0 + (t1 - t0) * double(i) / double(n_points - 1);
    out.values[std::size_t(i)] = spline(t);
  }
  if (boundary_time) {
    const double frac = (*boundary_time - t0) / (t1 - t0);
    out.boundary_index = int(std::lround(std::clamp(frac, 0.0, 1.0) * double(n_points - 1)));
  }
  return out;
}

AggregateSeries aggregate(const std::vector<NormalizedSeries>& trials) {
  if (trials.empty()) throw InputError("aggregate: needs at least one trial");
  const std::size_t n = trials.front().values.size();
  for (const auto& t : trials)
    if (t.values.size() != n) throw InputError("aggregate: grid length mismatch");
  AggregateSeries out;
  out.single_trial = trials.size() == 1;
  out.mean.assign(n, 0.0);
  out.sd.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> column(trials.size());
    for (std::size_t k = 0; k < trials.size(); ++k) column[k] = trials[k].values[i];
    const ScalarStats s = aggregate(column);
    out.mean[i] = s.mean;
    out.sd[i] = s.sd;
  }
  return out;
}

ScalarStats aggregate(std::span<const double> values) {
  if (values.empty()) throw InputError("aggregate: needs at least one value");
  ScalarStats s;
  s.single_trial = values.size() == 1;
  for (double v : values) s.mean += v;
  s.mean /= double(values.size());
  if (!s.single_trial) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / double(values.size() - 1));
  }
  return s;
}

ExtremaResult extrema(const NormalizedSeries& series, int begin_index, int end_index) {
  if (begin_index < 0 || end_index >= int(series.values.size()) || begin_index > end_index)
    throw InputError("extrema: empty or out-of-range window");
  ExtremaResult r;
  r.max_value = r.min_value = series.values[std::size_t(begin_index)];
  r.max_index = r.min_index = begin_index;
  for (int i = begin_index + 1; i <= end_index; ++i) {
    const double v = series.values[std::size_t(i)];
    if (v > r.max_value) { r.max_value = v; r.max_index = i; }
    if (v < r.min_value) { r.min_value = v; r.min_index = i; }
  }
  const double span = double(end_index - begin_index);
  r.max_percent = span > 0 ? 100.0 * double(r.max_index - begin_index) / span : 0.0;
  r.min_percent = span > 0 ? 100.0 * double(r.min_index - begin_index) / span : 0.0;
  return r;
}

}  // namespace limbdyn
