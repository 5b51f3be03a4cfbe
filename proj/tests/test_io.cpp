#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "limbdyn/io.hpp"
#include "limbdyn/oracle.hpp"

using namespace limbdyn;
namespace fs = std::filesystem;

namespace {

std::string three_frame_markers() {
  return
      "time_s,seg:a:x_mm,seg:a:y_mm,seg:a:z_mm,seg:b:x_mm,seg:b:y_mm,seg:b:z_mm,"
      "seg:c:x_mm,seg:c:y_mm,seg:c:z_mm\n"
      "0,10,20,30,40,50,60,70,80,90\n"
      "0.01,11,21,31,41,51,61,71,81,91\n"
      "0.02,12,22,32,42,52,62,72,82,92\n";
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("limbdyn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("marker parsing") {
  SUBCASE("well-formed three-frame file") {
    const auto series = parse_markers_text(three_frame_markers());
    REQUIRE(series.times.size() == 3);
    REQUIRE(series.segments.size() == 1);
    CHECK(series.sample_rate == doctest::Approx(100.0));
    CHECK(series.segments[0].labels.size() == 3);
    CHECK(series.segments[0].positions[0][0].x() == doctest::Approx(0.010));  // mm -> m
    CHECK(series.segments[0].positions[2][2].z() == doctest::Approx(0.092));
    CHECK(series.segments[0].valid[1][1]);
  }
  SUBCASE("duplicated timestamp names the line") {
    std::string text = three_frame_markers();
    text.replace(text.find("\n0.01,"), 6, "\n0,");
    try {
      parse_markers_text(text, {}, "markers.csv");
      FAIL("expected InputError");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("markers.csv:3") != std::string::npos);
      CHECK(std::string(e.what()).find("duplicated") != std::string::npos);
    }
  }
  SUBCASE("blank cell flags that marker invalid, frame kept") {
    std::string text = three_frame_markers();
    text.replace(text.find("41,51,61"), 8, ",51,61");
    const auto series = parse_markers_text(text);
    REQUIRE(series.times.size() == 3);
    CHECK_FALSE(series.segments[0].valid[1][1]);
    CHECK(series.segments[0].valid[1][0]);
    CHECK(series.segments[0].valid[0][1]);
  }
  SUBCASE("unknown segment label rejected against a known set") {
    CHECK_THROWS_AS(parse_markers_text(three_frame_markers(), {"radius", "cannon"}),
                    InputError);
  }
  SUBCASE("malformed header rejected") {
    CHECK_THROWS_AS(parse_markers_text("time_s,seg:a:x_mm,bogus\n0,1,2\n"), InputError);
    CHECK_THROWS_AS(parse_markers_text("frame,segax\n"), InputError);
  }
  SUBCASE("non-monotonic time rejected") {
    std::string text = three_frame_markers();
    text.replace(text.find("\n0.02,"), 6, "\n0.005,");
    CHECK_THROWS_AS(parse_markers_text(text), InputError);
  }
}

TEST_CASE("grf parsing") {
  const std::string header = "time_s,fx_N,fy_N,fz_N,copx_m,copy_m,copz_m\n";
  SUBCASE("well-formed 1000 Hz file") {
    std::string text = header;
    for (int i = 0; i < 10; ++i)
      text += format_double(i * 0.001) + ",1,2,500,0.1,0.2,0\n";
    const auto grf = parse_grf_text(text, 85.0);
    REQUIRE(grf.times.size() == 10);
    CHECK(grf.sample_rate == doctest::Approx(1000.0));
    CHECK(grf.force[0].z() == 500.0);
    CHECK(grf.cop_valid[0]);
    CHECK(grf.free_moment[0] == 0.0);
  }
  SUBCASE("negative vertical force is clamped with a warning") {
    std::string text = header;
    text += "0,0,0,100,0,0,0\n0.001,0,0,-5,0,0,0\n0.002,0,0,100,0,0,0\n";
    const auto grf = parse_grf_text(text, 10.0);
    CHECK(grf.force[1].z() == 0.0);
    CHECK_FALSE(grf.cop_valid[1]);
    REQUIRE(grf.warnings.size() == 1);
    CHECK(grf.warnings[0].find("clamped") != std::string::npos);
  }
  SUBCASE("free-moment column is accepted") {
    std::string text = "time_s,fx_N,fy_N,fz_N,copx_m,copy_m,copz_m,tz_Nm\n";
    text += "0,0,0,100,0,0,0,1.5\n0.001,0,0,100,0,0,0,1.6\n";
    const auto grf = parse_grf_text(text, 10.0);
    CHECK(grf.free_moment[1] == 1.6);
  }
  SUBCASE("empty file rejected") {
    CHECK_THROWS_AS(parse_grf_text("", 10.0), InputError);
    CHECK_THROWS_AS(parse_grf_text(header, 10.0), InputError);
  }
}

TEST_CASE("write then parse round-trips the numeric payload") {
  const auto dir = temp_dir("roundtrip");
  auto sc = synth_trot();
  sc.noise_sigma_m = 5e-4;
  sc.seed = 3;
  const auto sim = simulate_forward(sc);

  write_markers(dir / "m.csv", sim.markers);
  const auto markers = parse_markers(dir / "m.csv");
  REQUIRE(markers.times.size() == sim.markers.times.size());
  double worst = 0.0;
  for (std::size_t s = 0; s < markers.segments.size(); ++s)
    for (std::size_t f = 0; f < markers.times.size(); ++f)
      for (std::size_t m = 0; m < markers.segments[s].labels.size(); ++m)
        worst = std::max(worst, (markers.segments[s].positions[f][m] -
                                 sim.markers.segments[s].positions[f][m])
                                    .norm());
  CHECK(worst < 1e-12);

  write_grf(dir / "g.csv", sim.grf);
  const auto grf = parse_grf(dir / "g.csv", 10.0);
  REQUIRE(grf.times.size() == sim.grf.times.size());
  for (std::size_t f = 0; f < grf.times.size(); ++f) {
    CHECK((grf.force[f] - sim.grf.force[f]).norm() <
          1e-12 * std::max(1.0, sim.grf.force[f].norm()));
    CHECK((grf.cop[f] - sim.grf.cop[f]).norm() < 1e-12);
  }
}

TEST_CASE("report writing") {
  AnalysisReports reports;
  reports.joint_names = {"elbow", "carpus", "fetlock", "pastern", "coffin"};
  reports.grid_points = 101;
  reports.boundary_index = 43;
  reports.stance_fraction = 0.435;
  reports.stride_duration_s = 0.706;
  reports.body_mass_kg = 433.0;
  reports.trial_count = 1;

  const double fixture[5][6] = {
      {1.3325, -0.4154, 0.9171, 0.1234, -0.5207, -0.3973},
      {0.0698, -0.0351, 0.0348, 0.0974, -0.0071, 0.0903},
      {0.2266, -0.1664, 0.0603, 0.0171, -0.0021, 0.0150},
      {0.0214, -0.0207, 0.0007, 0.0008, -0.0005, 0.0003},
      {0.0414, -0.0425, -0.0010, 0.0010, -0.0007, 0.0003}};
  for (int j = 0; j < 5; ++j) {
    AnalysisReports::EnergyRow row;
    row.variant = "combined";
    row.joint = reports.joint_names[std::size_t(j)];
    for (int c = 0; c < 6; ++c) row.mean[std::size_t(c)] = fixture[j][c];
    reports.energy_rows.push_back(row);
  }

  SUBCASE("energy table carries the reference elbow row") {
    const auto dir = temp_dir("energy");
    write_reports(reports, dir);
    const std::string text = slurp(dir / "energy.csv");
    CHECK(text.find("combined,elbow,1.3325,-0.4154,0.9171") != std::string::npos);
  }
  SUBCASE("empty joint list yields header-only tables") {
    AnalysisReports empty;
    empty.grid_points = 101;
    const auto dir = temp_dir("empty");
    write_reports(empty, dir);
    CHECK(slurp(dir / "energy.csv") ==
          "variant,joint,gen_stance,abs_stance,net_stance,gen_swing,abs_swing,net_swing,"
          "gen_stance_sd,abs_stance_sd,net_stance_sd,gen_swing_sd,abs_swing_sd,"
          "net_swing_sd\n");
    CHECK(slurp(dir / "extrema.csv").find('\n') == slurp(dir / "extrema.csv").size() - 1);
  }
  SUBCASE("report writing is byte-deterministic") {
    const auto dir1 = temp_dir("det1");
    const auto dir2 = temp_dir("det2");
    write_reports(reports, dir1);
    write_reports(reports, dir2);
    for (const auto& name : {"energy.csv", "curves.csv", "extrema.csv",
                             "energy_fractions.csv", "stride.csv"})
      CHECK(slurp(dir1 / name) == slurp(dir2 / name));
  }
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 1.0, -1.5, 0.435, 9.4412, 1e-300, 3.141592653589793}) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}
