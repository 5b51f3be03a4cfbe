#include "limbdyn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "limbdyn/svg.hpp"

namespace limbdyn {

using nlohmann::json;
using std::numbers::pi;

std::string manifest_to_json(const RunManifest& manifest) {
  json doc;
  doc["chain_path"] = manifest.chain_path;
  doc["calibration_path"] = manifest.calibration_path;
  doc["cutoff_kin_hz"] = manifest.cutoff_kin_hz;
  doc["cutoff_grf_hz"] = manifest.cutoff_grf_hz;
  doc["contact_threshold_fraction"] = manifest.contact_threshold_fraction;
  doc["grid_points"] = manifest.grid_points;
  doc["seed"] = manifest.seed;
  doc["out_dir"] = manifest.out_dir;
  doc["trials"] = json::array();
  for (const auto& t : manifest.trials)
    doc["trials"].push_back({{"id", t.id},
                             {"markers_path", t.markers_path},
                             {"grf_path", t.grf_path}});
  return doc.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  RunManifest m;
  m.chain_path = doc.value("chain_path", "");
  m.calibration_path = doc.value("calibration_path", "");
  m.cutoff_kin_hz = doc.value("cutoff_kin_hz", m.cutoff_kin_hz);
  m.cutoff_grf_hz = doc.value("cutoff_grf_hz", m.cutoff_grf_hz);
  m.contact_threshold_fraction =
      doc.value("contact_threshold_fraction", m.contact_threshold_fraction);
  m.grid_points = doc.value("grid_points", m.grid_points);
  m.seed = doc.value("seed", m.seed);
  m.out_dir = doc.value("out_dir", "");
  if (doc.contains("trials"))
    for (const auto& t : doc["trials"])
      m.trials.push_back({t.value("id", ""), t.at("markers_path").get<std::string>(),
                          t.at("grf_path").get<std::string>()});
  return m;
}

TrialAnalysis analyze_trial(const LimbChain& chain, const TrialBundle& bundle,
                            const CalibrationPoses& calibration,
                            const RunManifest& manifest) {
  const double threshold_n =
      manifest.contact_threshold_fraction * chain.body_mass * kGravity;

  TrialAnalysis a;
  a.phases = detect_stance(bundle.grf, threshold_n);
  const double m0 = bundle.markers.times.front();
  const double m1 = bundle.markers.times.back();
  if (a.phases.stance_begin < m0 - 1e-9 || a.phases.stance_end > m1 + 1e-9)
    throw InputError("trial " + bundle.id +
                     ": marker window does not cover the full contact episode");
  a.phases.stride_begin = m0;
  a.phases.stride_end = m1;
  a.phases.stance_fraction =
      (a.phases.stance_end - a.phases.stance_begin) / (m1 - m0);

  a.poses = segment_poses(chain, bundle.markers);
  a.states = joint_states(chain, a.poses, calibration, manifest.cutoff_kin_hz);
  a.spatial = segment_spatial_states(chain, a.poses, manifest.cutoff_kin_hz);
  a.grf_aligned =
      resample_grf(bundle.grf, a.poses.times, manifest.cutoff_grf_hz, threshold_n);
  a.loads = inverse_dynamics(chain, a.spatial, a.grf_aligned);
  a.powers = joint_power(chain, a.loads, a.states);
  a.energy = integrate_energy(a.powers, a.phases);
  return a;
}

namespace {

const char* kRotChannels[3] = {"add_abd", "flex_ext", "int_ext"};
const char* kTransChannels[3] = {"cranial_caudal", "medio_lateral", "prox_dist"};
const char* kGrfChannels[3] = {"forward", "transverse", "vertical"};
// anatomical component order is (x, y, z); rotations map x->add_abd etc.

std::vector<double> component(const std::vector<Vec3>& v, int k) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i][k];
  return out;
}

struct CurveKey {
  std::string quantity, joint, channel;
  bool operator<(const CurveKey& o) const {
    return std::tie(quantity, joint, channel) < std::tie(o.quantity, o.joint, o.channel);
  }
};

ExtremaResult cyclic_swing_extrema(const NormalizedSeries& mean_curve, int b) {
  // swing wraps from the stance end to the stance begin of the next stride;
  // with stance leading the stride this is simply the trailing window
  return extrema(mean_curve, b, int(mean_curve.values.size()) - 1);
}

}  // namespace

AnalysisReports run_analyze(const RunManifest& manifest) {
  if (manifest.trials.empty()) throw InputError("manifest lists no trials");
  if (manifest.grid_points < 2) throw InputError("grid_points must be at least 2");

  const LimbChain chain =
      manifest.chain_path.empty() ? default_chain() : build_chain_file(manifest.chain_path);
  std::vector<std::string> known_segments{chain.parent.name};
  for (const auto& s : chain.segments) known_segments.push_back(s.name);

  CalibrationPoses calibration;
  if (manifest.calibration_path.empty()) {
    calibration = aligned_calibration(chain);
  } else {
    const auto calib_markers = parse_markers(manifest.calibration_path, known_segments);
    calibration = calibration_from_poses(chain, segment_poses(chain, calib_markers));
  }
  const double threshold_n =
      manifest.contact_threshold_fraction * chain.body_mass * kGravity;

  std::vector<TrialAnalysis> trials;
  for (const auto& input : manifest.trials) {
    TrialBundle bundle;
    bundle.id = input.id;
    bundle.chain_name = chain.name;
    bundle.markers = parse_markers(input.markers_path, known_segments);
    bundle.grf = parse_grf(input.grf_path, threshold_n);
    trials.push_back(analyze_trial(chain, bundle, calibration, manifest));
  }

  AnalysisReports reports;
  for (const auto& j : chain.joints) reports.joint_names.push_back(j.name);
  reports.grid_points = manifest.grid_points;
  reports.body_mass_kg = chain.body_mass;
  reports.trial_count = int(trials.size());
  {
    std::vector<double> fractions, durations;
    for (const auto& t : trials) {
      fractions.push_back(t.phases.stance_fraction);
      durations.push_back(t.phases.stride_end - t.phases.stride_begin);
    }
    reports.stance_fraction = aggregate(fractions).mean;
    reports.stride_duration_s = aggregate(durations).mean;
  }
  reports.boundary_index =
      int(std::lround(reports.stance_fraction * double(manifest.grid_points - 1)));

  // normalized curves per trial, aggregated across trials
  std::map<CurveKey, std::vector<NormalizedSeries>> curves;
  auto add_curve = [&](const std::string& quantity, const std::string& joint,
                       const std::string& channel, const TrialAnalysis& t,
                       const std::vector<double>& values) {
    curves[CurveKey{quantity, joint, channel}].push_back(time_normalize(
        values, t.powers.times, manifest.grid_points, t.phases.stance_end));
  };
  for (const auto& t : trials) {
    for (std::size_t j = 0; j < chain.joints.size(); ++j) {
      const auto& name = chain.joints[j].name;
      const auto& st = t.states.of(name);
      const auto& ld = t.loads.of(name);
      const auto& pw = t.powers.of(name);
      for (int k = 0; k < 3; ++k) {
        add_curve("angle", name, kRotChannels[k], t, component(st.angles, k));
        add_curve("translation", name, kTransChannels[k], t, component(st.trans, k));
        add_curve("moment", name, kRotChannels[k], t, component(ld.moment_per_kg, k));
        add_curve("force", name, kTransChannels[k], t, component(ld.force_per_kg, k));
        add_curve("power_rot", name, kRotChannels[k], t, component(pw.rotational_per_kg, k));
        add_curve("power_trans", name, kTransChannels[k], t,
                  component(pw.translational_per_kg, k));
      }
    }
    std::vector<Vec3> grf_per_kg(t.grf_aligned.force.size());
    for (std::size_t f = 0; f < grf_per_kg.size(); ++f)
      grf_per_kg[f] = t.grf_aligned.force[f] / chain.body_mass;
    for (int k = 0; k < 3; ++k)
      add_curve("grf", "ground", kGrfChannels[k], t, component(grf_per_kg, k));
    auto gm = grf_ground_moment(chain, t.spatial, t.grf_aligned);
    for (auto& v : gm) v /= chain.body_mass;
    const char* lab[3] = {"x", "y", "z"};
    for (int k = 0; k < 3; ++k)
      add_curve("ground_moment", "ground", lab[k], t, component(gm, k));
  }

  std::map<CurveKey, AggregateSeries> mean_curves;
  for (const auto& [key, series] : curves) {
    AggregateSeries agg = aggregate(series);
    reports.curves.push_back({key.quantity, key.joint, key.channel, agg});
    mean_curves[key] = std::move(agg);
  }

  // extrema of the mean curves, per phase, sd taken at the extremum location
  const int b = reports.boundary_index;
  for (const auto& quantity : {"moment", "force", "power_rot", "power_trans"}) {
    for (const auto& joint : reports.joint_names) {
      const bool rot = std::string(quantity) == "moment" ||
                       std::string(quantity) == "power_rot";
      for (int k = 0; k < 3; ++k) {
        const std::string channel = rot ? kRotChannels[k] : kTransChannels[k];
        auto it = mean_curves.find(CurveKey{quantity, joint, channel});
        if (it == mean_curves.end()) continue;
        NormalizedSeries mean_series{it->second.mean, b};
        const ExtremaResult stance = extrema(mean_series, 0, b);
        const ExtremaResult swing = cyclic_swing_extrema(mean_series, b);
        auto row = [&](const char* phase, const ExtremaResult& r) {
          AnalysisReports::ExtremaRow er;
          er.quantity = quantity;
          er.joint = joint;
          er.channel = channel;
          er.phase = phase;
          er.max_mean = r.max_value;
          er.max_sd = it->second.sd[std::size_t(r.max_index)];
          er.max_percent = r.max_percent;
          er.min_mean = r.min_value;
          er.min_sd = it->second.sd[std::size_t(r.min_index)];
          er.min_percent = r.min_percent;
          reports.extrema_rows.push_back(er);
        };
        row("stance", stance);
        row("swing", swing);
      }
    }
  }

  // energy tables: aggregate each cell across trials
  auto energy_rows = [&](const std::string& variant,
                         std::function<const EnergyTable&(const EnergySummary&)> pick) {
    const std::size_t nj = chain.joints.size();
    for (std::size_t j = 0; j <= nj; ++j) {  // last row: totals
      AnalysisReports::EnergyRow row;
      row.variant = variant;
      row.joint = j < nj ? chain.joints[j].name : "total";
      for (int cell = 0; cell < 6; ++cell) {
        std::vector<double> values;
        for (const auto& t : trials) {
          const EnergyTable& table = pick(t.energy);
          const PhaseEnergy& stance =
              j < nj ? table.joints[j].stance : table.stance_total;
          const PhaseEnergy& swing = j < nj ? table.joints[j].swing : table.swing_total;
          const double v = cell == 0 ? stance.generated
                         : cell == 1 ? stance.absorbed
                         : cell == 2 ? stance.net
                         : cell == 3 ? swing.generated
                         : cell == 4 ? swing.absorbed
                                     : swing.net;
          values.push_back(v);
        }
        const ScalarStats s = aggregate(values);
        row.mean[std::size_t(cell)] = s.mean;
        row.sd[std::size_t(cell)] = s.sd;
      }
      reports.energy_rows.push_back(row);
    }
  };
  energy_rows("rotational", [](const EnergySummary& e) -> const EnergyTable& {
    return e.rotational;
  });
  energy_rows("translational", [](const EnergySummary& e) -> const EnergyTable& {
    return e.translational;
  });
  energy_rows("combined", [](const EnergySummary& e) -> const EnergyTable& {
    return e.combined;
  });

  // fraction tables: per trial, then aggregated; any undefined trial share
  // leaves the aggregate undefined
  auto fraction_rows = [&](const std::string& variant,
                           std::function<const EnergyTable&(const EnergySummary&)> pick) {
    std::vector<FractionTable> per_trial;
    for (const auto& t : trials) per_trial.push_back(energy_fractions(pick(t.energy)));
    auto cell = [&](std::function<std::optional<double>(const FractionTable&)> get)
        -> std::pair<std::optional<double>, std::optional<double>> {
      std::vector<double> values;
      for (const auto& ft : per_trial) {
        const auto v = get(ft);
        if (!v) return {std::nullopt, std::nullopt};
        values.push_back(*v);
      }
      const ScalarStats s = aggregate(values);
      return {s.mean, s.sd};
    };
    {
      AnalysisReports::FractionRow row;
      row.variant = variant;
      row.row = "phase_share";
      auto [m0, s0] = cell([](const FractionTable& f) { return f.gen_stance_phase; });
      auto [m1, s1] = cell([](const FractionTable& f) { return f.gen_swing_phase; });
      auto [m2, s2] = cell([](const FractionTable& f) { return f.abs_stance_phase; });
      auto [m3, s3] = cell([](const FractionTable& f) { return f.abs_swing_phase; });
      row.mean = {m0, m1, m2, m3};
      row.sd = {s0, s1, s2, s3};
      reports.fraction_rows.push_back(row);
    }
    for (std::size_t j = 0; j < chain.joints.size(); ++j) {
      AnalysisReports::FractionRow row;
      row.variant = variant;
      row.row = chain.joints[j].name;
      auto [m0, s0] = cell([&](const FractionTable& f) { return f.gen_stance[j]; });
      auto [m1, s1] = cell([&](const FractionTable& f) { return f.gen_swing[j]; });
      auto [m2, s2] = cell([&](const FractionTable& f) { return f.abs_stance[j]; });
      auto [m3, s3] = cell([&](const FractionTable& f) { return f.abs_swing[j]; });
      row.mean = {m0, m1, m2, m3};
      row.sd = {s0, s1, s2, s3};
      reports.fraction_rows.push_back(row);
    }
  };
  fraction_rows("rotational", [](const EnergySummary& e) -> const EnergyTable& {
    return e.rotational;
  });
  fraction_rows("translational", [](const EnergySummary& e) -> const EnergyTable& {
    return e.translational;
  });
  fraction_rows("combined", [](const EnergySummary& e) -> const EnergyTable& {
    return e.combined;
  });

  if (!manifest.out_dir.empty()) {
    write_reports(reports, manifest.out_dir);
    std::ofstream mf(std::filesystem::path(manifest.out_dir) / "manifest.json",
                     std::ios::binary);
    if (!mf) throw InputError("cannot write manifest into " + manifest.out_dir);
    mf << manifest_to_json(manifest);
  }
  return reports;
}

void run_synth(const SyntheticScenario& scenario, const std::filesystem::path& out_dir) {
  const SimulationResult sim = simulate_forward(scenario);
  std::filesystem::create_directories(out_dir);
  write_markers(out_dir / "markers.csv", sim.markers);
  write_grf(out_dir / "grf.csv", sim.grf);

  // three identical standing frames so the calibration file parses as a series
  MarkerFrameSeries calib;
  calib.sample_rate = scenario.marker_rate_hz;
  const LimbChain& chain = scenario.chain;
  for (int f = 0; f < 3; ++f)
    calib.times.push_back(double(f) / scenario.marker_rate_hz);
  auto emit = [&](const std::string& name, const std::vector<MarkerTemplatePoint>& tmpl,
                  const Pose& pose) {
    SegmentMarkers sm;
    sm.segment = name;
    for (const auto& p : tmpl) sm.labels.push_back(p.label);
    sm.positions.assign(3, std::vector<Vec3>(tmpl.size()));
    sm.valid.assign(3, std::vector<bool>(tmpl.size(), true));
    for (int f = 0; f < 3; ++f)
      for (std::size_t m = 0; m < tmpl.size(); ++m)
        sm.positions[std::size_t(f)][m] =
            pose.rotation * tmpl[m].position + pose.translation;
    calib.segments.push_back(std::move(sm));
  };
  emit(chain.parent.name, chain.parent.marker_template,
       sim.calibration.of(chain.parent.name));
  for (const auto& s : chain.segments)
    emit(s.name, s.marker_template, sim.calibration.of(s.name));
  write_markers(out_dir / "calib.csv", calib);

  {
    json info;
    info["seed"] = scenario.seed;
    info["noise_sigma_m"] = scenario.noise_sigma_m;
    info["marker_rate_hz"] = scenario.marker_rate_hz;
    info["grf_rate_hz"] = scenario.grf_rate_hz;
    info["duration_s"] = scenario.duration_s;
    info["dt"] = scenario.dt;
    info["gravity"] = scenario.gravity;
    info["mode"] = scenario.angles ? "angles" : "torques";
    std::ofstream f(out_dir / "synth_info.json", std::ios::binary);
    if (!f) throw InputError("cannot write synth_info.json");
    f << info.dump(2) << "\n";
  }

  std::ofstream truth(out_dir / "truth_loads.csv", std::ios::binary);
  if (!truth) throw InputError("cannot write truth_loads.csv");
  truth << "time_s";
  for (const auto& j : sim.true_loads.joints)
    truth << ',' << j.joint << ":mx_Nm_per_kg," << j.joint << ":my_Nm_per_kg," << j.joint
          << ":mz_Nm_per_kg," << j.joint << ":fx_N_per_kg," << j.joint << ":fy_N_per_kg,"
          << j.joint << ":fz_N_per_kg";
  truth << '\n';
  for (std::size_t f = 0; f < sim.true_loads.times.size(); ++f) {
    truth << format_double(sim.true_loads.times[f]);
    for (const auto& j : sim.true_loads.joints) {
      for (int k = 0; k < 3; ++k) truth << ',' << format_double(j.moment_per_kg[f][k]);
      for (int k = 0; k < 3; ++k) truth << ',' << format_double(j.force_per_kg[f][k]);
    }
    truth << '\n';
  }
}

}  // namespace limbdyn
