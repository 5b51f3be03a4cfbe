#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "limbdyn/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitVerify = 4;

void report_error(const std::string& kind, const std::string& message,
                  const std::string& out_dir) {
  nlohmann::json err;
  err["error"] = kind;
  err["message"] = message;
  std::cerr << err.dump() << "\n";
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!ec) {
      std::ofstream f(std::filesystem::path(out_dir) / "error.json", std::ios::binary);
      if (f) f << err.dump(2) << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D joint torque, power and energy reconstruction for a limb chain"};
  app.require_subcommand(1);

  limbdyn::RunManifest manifest;
  std::vector<std::string> marker_paths, grf_paths;
  auto* analyze = app.add_subcommand(
      "analyze", "run the full pipeline on marker + force-plate trials");
  analyze->add_option("--markers", marker_paths, "marker CSV, one per trial")
      ->required()
      ->expected(-1);
  analyze->add_option("--grf", grf_paths, "GRF CSV, one per trial")
      ->required()
      ->expected(-1);
  analyze->add_option("--chain", manifest.chain_path,
                      "chain configuration JSON (built-in forelimb when omitted)");
  analyze->add_option("--calib", manifest.calibration_path,
                      "standing calibration marker CSV (aligned frames when omitted)");
  analyze->add_option("--cutoff-kin", manifest.cutoff_kin_hz,
                      "kinematic low-pass cutoff, Hz (<=0 disables)");
  analyze->add_option("--cutoff-grf", manifest.cutoff_grf_hz,
                      "GRF low-pass cutoff, Hz (<=0 disables)");
  analyze->add_option("--contact-threshold", manifest.contact_threshold_fraction,
                      "contact threshold as a fraction of body weight");
  analyze->add_option("--grid-points", manifest.grid_points,
                      "percent-of-stride grid size");
  analyze->add_option("--seed", manifest.seed, "seed recorded into the manifest");
  analyze->add_option("--out", manifest.out_dir, "output directory")->required();

  std::string scenario_path, synth_out;
  bool synth_trot_default = false;
  std::uint64_t synth_seed = 0;
  bool synth_seed_set = false;
  auto* synth = app.add_subcommand("synth", "simulate a scenario and emit trial files");
  synth->add_option("--scenario", scenario_path, "scenario JSON");
  synth->add_flag("--trot", synth_trot_default, "use the built-in trot scenario");
  auto* seed_opt = synth->add_option("--seed", synth_seed, "override the scenario seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  std::string verify_filter, verify_mutate;
  auto* verify = app.add_subcommand("verify", "run the built-in oracle suite");
  verify->add_option("--filter", verify_filter, "run only checks whose name contains this");
  verify->add_option("--mutate", verify_mutate,
                     "inject a known defect (test mode): table3-sign");

  std::string chain_out;
  auto* chain_template =
      app.add_subcommand("chain-template", "print the built-in chain configuration");
  chain_template->add_option("--out", chain_out, "write to file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) {
      if (marker_paths.size() != grf_paths.size())
        throw limbdyn::InputError("--markers and --grf need the same number of paths");
      for (std::size_t i = 0; i < marker_paths.size(); ++i)
        manifest.trials.push_back({"trial" + std::to_string(i), marker_paths[i],
                                   grf_paths[i]});
      limbdyn::run_analyze(manifest);
      return kExitOk;
    }
    if (*synth) {
      limbdyn::SyntheticScenario scenario;
      if (synth_trot_default || scenario_path.empty()) {
        limbdyn::TrotParams params;
        if (*seed_opt) params.seed = synth_seed;
        scenario = limbdyn::synth_trot(params);
        synth_seed_set = true;
      } else {
        scenario = limbdyn::parse_scenario_file(scenario_path);
      }
      if (*seed_opt && !synth_seed_set) scenario.seed = synth_seed;
      limbdyn::run_synth(scenario, synth_out);
      return kExitOk;
    }
    if (*verify) {
      const auto result = limbdyn::run_verify(verify_filter, verify_mutate);
      for (const auto& line : result.lines) std::cout << line << "\n";
      std::cout << result.passed << " passed, " << result.failed << " failed\n";
      return result.failed == 0 ? kExitOk : kExitVerify;
    }
    if (*chain_template) {
      if (chain_out.empty()) {
        std::cout << limbdyn::default_chain_config_text();
      } else {
        std::ofstream f(chain_out, std::ios::binary);
        if (!f) throw limbdyn::InputError("cannot write " + chain_out);
        f << limbdyn::default_chain_config_text();
      }
      return kExitOk;
    }
  } catch (const limbdyn::InputError& e) {
    report_error("input", e.what(), manifest.out_dir);
    return kExitInput;
  } catch (const limbdyn::NumericError& e) {
    report_error("numeric", e.what(), manifest.out_dir);
    return kExitNumeric;
  } catch (const std::exception& e) {
    report_error("internal", e.what(), manifest.out_dir);
    return kExitNumeric;
  }
  return kExitOk;
}
