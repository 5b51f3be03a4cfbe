#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "limbdyn/pipeline.hpp"

using namespace limbdyn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("limbdyn_pipe_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// one synthesized trot trial shared across the cases below
struct SynthTrial {
  fs::path dir;
  SynthTrial() : dir(temp_dir("trial")) {
    auto sc = synth_trot();
    run_synth(sc, dir);
  }
};

const SynthTrial& trial() {
  static SynthTrial t;
  return t;
}

}  // namespace

TEST_CASE("manifest round-trips through json") {
  RunManifest m;
  m.trials.push_back({"t0", "a.csv", "b.csv"});
  m.trials.push_back({"t1", "c.csv", "d.csv"});
  m.chain_path = "chain.json";
  m.cutoff_kin_hz = 12.5;
  m.cutoff_grf_hz = 40.0;
  m.contact_threshold_fraction = 0.03;
  m.grid_points = 201;
  m.seed = 99;
  m.out_dir = "/tmp/x";
  const RunManifest back = manifest_from_json(manifest_to_json(m));
  CHECK(back.trials.size() == 2);
  CHECK(back.trials[1].markers_path == "c.csv");
  CHECK(back.chain_path == m.chain_path);
  CHECK(back.cutoff_kin_hz == m.cutoff_kin_hz);
  CHECK(back.grid_points == m.grid_points);
  CHECK(back.seed == m.seed);
}

TEST_CASE("synthesized trial files parse back cleanly") {
  const auto& t = trial();
  const auto markers = parse_markers(t.dir / "markers.csv");
  CHECK(markers.segments.size() == 5);  // parent + 4 chain segments
  CHECK(markers.sample_rate == doctest::Approx(120.0));
  const auto grf = parse_grf(t.dir / "grf.csv", 10.0);
  CHECK(grf.sample_rate == doctest::Approx(1000.0));
  const auto calib = parse_markers(t.dir / "calib.csv");
  CHECK(calib.times.size() == 3);
  CHECK(fs::exists(t.dir / "truth_loads.csv"));
  CHECK(fs::exists(t.dir / "synth_info.json"));
}

TEST_CASE("run_analyze produces the full report set") {
  const auto& t = trial();
  const auto out = temp_dir("analyze");
  RunManifest manifest;
  manifest.trials.push_back({"trot", (t.dir / "markers.csv").string(),
                             (t.dir / "grf.csv").string()});
  manifest.calibration_path = (t.dir / "calib.csv").string();
  manifest.out_dir = out.string();
  const auto reports = run_analyze(manifest);

  CHECK(reports.joint_names ==
        std::vector<std::string>{"elbow", "carpus", "fetlock", "coffin"});
  CHECK(reports.stance_fraction > 0.40);
  CHECK(reports.stance_fraction < 0.46);

  for (const auto& name :
       {"curves.csv", "extrema.csv", "energy.csv", "energy_fractions.csv", "stride.csv",
        "manifest.json"})
    CHECK(fs::exists(out / name));
  CHECK(fs::exists(out / "plots" / "moment_elbow.svg"));
  CHECK(fs::exists(out / "plots" / "grf.svg"));

  // energy table: all joints present in every variant, gen + abs = net
  std::set<std::string> variants;
  for (const auto& row : reports.energy_rows) {
    variants.insert(row.variant);
    CHECK(row.mean[0] + row.mean[1] == doctest::Approx(row.mean[2]).epsilon(1e-9));
    CHECK(row.mean[3] + row.mean[4] == doctest::Approx(row.mean[5]).epsilon(1e-9));
  }
  CHECK(variants == std::set<std::string>{"rotational", "translational", "combined"});

  // curve rows exist for every quantity
  std::set<std::string> quantities;
  for (const auto& c : reports.curves) quantities.insert(c.quantity);
  for (const auto& q : {"angle", "translation", "moment", "force", "power_rot",
                        "power_trans", "grf", "ground_moment"})
    CHECK(quantities.count(q) == 1);

  SUBCASE("rerun is byte-identical") {
    const auto snapshot_dir = temp_dir("analyze_snap");
    for (const auto& entry : fs::recursive_directory_iterator(out))
      if (entry.is_regular_file())
        fs::copy(entry.path(), snapshot_dir / entry.path().filename());
    run_analyze(manifest);
    for (const auto& entry : fs::recursive_directory_iterator(out))
      if (entry.is_regular_file())
        CHECK(slurp(entry.path()) == slurp(snapshot_dir / entry.path().filename()));
  }

  SUBCASE("two-trial aggregation fills sd columns") {
    RunManifest two = manifest;
    two.out_dir.clear();
    two.trials.push_back({"again", (t.dir / "markers.csv").string(),
                          (t.dir / "grf.csv").string()});
    const auto r2 = run_analyze(two);
    CHECK(r2.trial_count == 2);
    for (const auto& row : r2.energy_rows)
      for (double sd : row.sd) CHECK(sd == 0.0);  // identical trials
  }
}

TEST_CASE("run_analyze fails cleanly on missing input") {
  RunManifest manifest;
  manifest.trials.push_back({"x", "/nonexistent/markers.csv", "/nonexistent/grf.csv"});
  const auto out = temp_dir("missing");
  manifest.out_dir = (out / "sub").string();
  CHECK_THROWS_AS(run_analyze(manifest), InputError);
  CHECK_FALSE(fs::exists(out / "sub" / "energy.csv"));  // no partial tables
}

TEST_CASE("shipped scenario files stay parseable and simulate") {
  const std::string root = LIMBDYN_SOURCE_DIR;
  {
    const auto sc = parse_scenario_file(root + "/configs/scenario_trot.json");
    CHECK(sc.angles.has_value());
    CHECK(sc.chain.joints.size() == 4);
  }
  {
    auto sc = parse_scenario_file(root + "/configs/scenario_double_pendulum.json");
    CHECK(sc.torques.has_value());
    sc.duration_s = 0.2;  // keep the test quick
    const auto sim = simulate_forward(sc);
    CHECK(sim.markers.times.size() > 100);
  }
}

TEST_CASE("verify suite passes clean and fails under mutation") {
  const auto clean = run_verify("convention");
  CHECK(clean.failed == 0);
  CHECK(clean.passed >= 1);
  const auto mutated = run_verify("convention", "table3-sign");
  CHECK(mutated.failed == 1);
  const auto empty = run_verify("zzz-no-such-check");
  CHECK(empty.failed == 0);
  CHECK(empty.passed == 0);
  REQUIRE(empty.lines.size() == 1);
  CHECK(empty.lines[0].find("WARN") != std::string::npos);
}
