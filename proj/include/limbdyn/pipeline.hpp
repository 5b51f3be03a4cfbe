#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "limbdyn/io.hpp"
#include "limbdyn/oracle.hpp"

namespace limbdyn {

/// Everything a run depends on; recorded verbatim into the output directory
/// so a rerun reproduces it byte for byte.
struct RunManifest {
  struct TrialInput {
    std::string id;
    std::string markers_path;
    std::string grf_path;
  };
  std::vector<TrialInput> trials;
  std::string chain_path;        // empty: built-in default chain
  std::string calibration_path;  // empty: aligned standing calibration
  double cutoff_kin_hz = 10.0;
  double cutoff_grf_hz = 50.0;
  double contact_threshold_fraction = 0.02;  // of body weight
  int grid_points = 101;
  std::uint64_t seed = 0;
  std::string out_dir;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& json_text);

/// Intermediate products of one trial, exposed for tests and verification.
struct TrialAnalysis {
  PhaseEvents phases;
  SegmentPoseSeries poses;
  JointStateSeries states;
  SegmentSpatialState spatial;
  GrfSeries grf_aligned;
  NetJointLoadSeries loads;
  JointPowerSeries powers;
  EnergySummary energy;
};

TrialAnalysis analyze_trial(const LimbChain& chain, const TrialBundle& bundle,
                            const CalibrationPoses& calibration,
                            const RunManifest& manifest);

/// ingest -> kinematics -> dynamics -> energetics -> aggregated reports.
/// Writes report files plus the manifest into manifest.out_dir.
AnalysisReports run_analyze(const RunManifest& manifest);

/// Simulate a scenario and write marker/GRF/calibration CSVs (and the
/// ground-truth loads) into out_dir.
void run_synth(const SyntheticScenario& scenario, const std::filesystem::path& out_dir);

struct VerifyResult {
  int passed = 0;
  int failed = 0;
  int skipped = 0;
  std::vector<std::string> lines;  // one "PASS name: detail" line per check
};

/// Built-in verification suite: convention fixture, static cases, pendulum
/// roundtrips, conservation, trot-shape properties. `filter` selects checks
/// by substring; `mutate` injects a deliberate defect (test mode), currently
/// only "table3-sign".
VerifyResult run_verify(const std::string& filter = "", const std::string& mutate = "");

}  // namespace limbdyn
