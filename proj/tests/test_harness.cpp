#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clonesim/harness.hpp"

using namespace clonesim;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = CLONESIM_SCENARIO_DIR;
const fs::path kData = CLONESIM_TEST_DATA_DIR;

Scenario bundled(const std::string& name) { return load_scenario((kScenarios / (name + ".yaml")).string()); }

std::string csv_of(const ScenarioResult& r) {
  std::ostringstream os;
  write_csv(os, r);
  return os.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("clonesim_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + CLONESIM_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kEfficiencyScenario = R"(
name: efficiency
cloner:
  variant: experimental_1to2
  ff_detector: {quantum_efficiency: 1.0, visibility: 1.0}
input:
  coherent: {x: 2, p: 1}
)";

}  // namespace

TEST(Scenario, BundledFilesRoundTripThroughCanonicalYaml) {
  const auto files = scenario_files(kScenarios);
  ASSERT_GE(files.size(), 8u);
  for (const auto& f : files) {
    const Scenario s = load_scenario(f.string());
    EXPECT_EQ(parse_scenario_string(emit_scenario(s)), s) << f;
  }
}

TEST(Scenario, RoundTripsExplicitGainsAndLists) {
  const Scenario s = parse_scenario_string(R"(
name: explicit
cloner:
  variant: experimental_1to2
  tap_transmittance: 0.45
  gains: [{x: 1.4, p: 1.41}]
  gain_scale: 1.01
  ff_detector: {quantum_efficiency: 0.9, visibility: 0.98, electronic_noise: 0.01}
  verify_detectors: [{quantum_efficiency: 0.7}, {quantum_efficiency: 0.8, electronic_noise_db: -20}]
input: {coherent: {x: 0.1, p: -7.25}}
mode: monte_carlo
shots: 500
seed: 99
outputs: {csv: a.csv}
expect:
  fidelity: {value: [0.6, 0.61], tol: 0.1}
)");
  EXPECT_EQ(parse_scenario_string(emit_scenario(s)), s);
  ASSERT_TRUE(s.cloner.gains.has_value());
  EXPECT_DOUBLE_EQ((*s.cloner.gains)[0].p, 1.41);
  EXPECT_NEAR(s.cloner.verify_detectors[1].electronic_noise, 0.01, 1e-15);
  EXPECT_EQ(s.outputs.record, "explicit.json");
}

TEST(Scenario, RejectsUnknownKeysAndBadValues) {
  auto fails_with = [](const std::string& yaml, const std::string& needle) {
    try {
      parse_scenario_string(yaml);
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
      return;
    }
    ADD_FAILURE() << "accepted: " << yaml;
  };
  fails_with("name: a\ncloner: {variant: ideal_1to2, tap_transmitance: 0.5}\n", "tap_transmitance");
  fails_with("name: a\ncloner: {variant: ideal_1to2}\nshot: 10\n", "shot");
  fails_with("name: a\ncloner: {variant: ideal_1to2, ff_detector: {qe: 0.9}}\n", "qe");
  fails_with("name: a\ncloner: {variant: quantum_1to2}\n", "quantum_1to2");
  fails_with("name: a\ncloner: {variant: ideal_1to2, tap_transmittance: half}\n", "tap_transmittance");
  fails_with("name: a\ncloner: {variant: ideal_1to2}\nmode: fast\n", "mode");
  fails_with(
      "name: a\ncloner: {variant: ideal_1to2, ff_detector: {electronic_noise: 0.1, electronic_noise_db: -10}}\n",
      "not both");
  fails_with("name: a\ncloner: {variant: ideal_1to2}\ninput: {ensemble: {nbar: 5}}\nmode: monte_carlo\n",
             "analytic");
  fails_with("name: a\ncloner: [1, 2]\n", "cloner");
  EXPECT_THROW(load_scenario((kScenarios / "missing.yaml").string()), ConfigError);
}

TEST(Scenario, ElectronicNoiseInDecibels) {
  const auto s = parse_scenario_string(
      "name: a\ncloner: {variant: experimental_1to2, ff_detector: {electronic_noise_db: -25}}\n");
  EXPECT_NEAR(s.cloner.ff_detector.electronic_noise, 0.0031622776601683794, 1e-15);
}

TEST(Sweep, OverridesNestedAndIndexedPaths) {
  const auto s = bundled("experimental");
  EXPECT_DOUBLE_EQ(with_override(s, "cloner.ff_detector.quantum_efficiency", "0.5").cloner.ff_detector.quantum_efficiency,
                   0.5);
  EXPECT_DOUBLE_EQ(with_override(s, "cloner.verify_detectors.1.quantum_efficiency", "0.6")
                       .cloner.verify_detectors[1]
                       .quantum_efficiency,
                   0.6);
  EXPECT_DOUBLE_EQ(std::get<CoherentInput>(with_override(s, "input.coherent.p", "-3").input).p, -3.0);
  EXPECT_THROW(with_override(s, "cloner.ff_detector.qe", "0.5"), ConfigError);
  EXPECT_THROW(with_override(s, "cloner.nothing.here", "1"), ConfigError);
  EXPECT_THROW(with_override(s, "cloner.verify_detectors.7.visibility", "1"), ConfigError);
  EXPECT_THROW(with_override(s, "cloner.ff_detector.quantum_efficiency", "1.5"), ConfigError);
  EXPECT_THROW(sweep(s, "cloner.ff_detector.quantum_efficiency", {}), ConfigError);
}

TEST(Sweep, EfficiencyGrid) {
  const auto s = parse_scenario_string(kEfficiencyScenario);
  const auto pts = sweep(s, "cloner.ff_detector.quantum_efficiency", {"1.0", "0.93", "0.785"}, 3);
  ASSERT_EQ(pts.size(), 3u);
  const double want[3] = {0.6667, 0.650, 0.611};
  for (std::size_t i = 0; i < 3; ++i) {
    for (const auto& c : pts[i].result.run.report.clones) EXPECT_NEAR(c.fidelity, want[i], 5e-4) << pts[i].value;
  }
  EXPECT_EQ(pts[1].value, "0.93");
}

TEST(Sweep, CloneCountGridIsStrictlyDecreasing) {
  std::vector<std::string> grid;
  for (int m = 2; m <= 10; ++m) grid.push_back(std::to_string(m));
  const auto pts = sweep(bundled("symmetric_1toM"), "cloner.clones", grid, 4);
  double prev = 1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(pts[i].value, grid[i]);
    ASSERT_EQ(pts[i].result.run.report.clones.size(), i + 2);
    const double f = pts[i].result.run.report.clones[0].fidelity;
    EXPECT_LT(f, prev);
    prev = f;
  }
  std::ostringstream os;
  write_sweep_csv(os, "cloner.clones", pts);
  EXPECT_EQ(os.str().rfind("parameter,value,scenario,clone_id,", 0), 0u);
}

TEST(Sweep, GainGridPeaksAtUnity) {
  auto s = with_override(with_override(bundled("ideal"), "input.coherent.x", "10"), "input.coherent.p", "0");
  s.expect = {};
  // Clone gain is (1 + gain_scale)/2 on the balanced 1->2 cloner, so this
  // grid gives clone gains 0.9, 1.0 and 1.1.
  const auto pts = sweep(s, "cloner.gain_scale", {"0.8", "1.0", "1.2"}, 2);
  const double want_gain[3] = {0.9, 1.0, 1.1};
  double f[3];
  for (int i = 0; i < 3; ++i) {
    const auto& c = pts[i].result.run.report.clones[0];
    EXPECT_NEAR(c.gain_x, want_gain[i], 1e-12);
    f[i] = c.fidelity;
  }
  EXPECT_GT(f[1], f[0]);
  EXPECT_GT(f[1], f[2]);
  EXPECT_NEAR(f[1], 2.0 / 3.0, 1e-12);
}

TEST(Output, NumberFormatting) {
  EXPECT_EQ(format_number(2.0 / 3.0), "0.666666667");
  EXPECT_EQ(format_number(2.0), "2");
  EXPECT_EQ(format_number(1234567891.0), "1.23456789e+09");
  EXPECT_EQ(format_number(-0.5), "-0.5");
}

TEST(Output, CsvMatchesGoldenFile) {
  const auto ideal = run_scenario(bundled("ideal"));
  const auto classical = run_scenario(bundled("classical"));
  std::ostringstream os;
  write_csv(os, ideal);
  for (const auto& c : classical.run.report.clones) os << csv_row(classical.scenario.name, c) << "\n";
  EXPECT_EQ(os.str(), read_file(kData / "golden.csv"));
  EXPECT_EQ(csv_header(),
            "scenario,clone_id,gain_x,gain_p,var_x,var_p,added_db_x,added_db_p,fidelity,fidelity_err");
}

TEST(Output, SameSeedGivesIdenticalBytes) {
  auto s = bundled("experimental");
  s.mode = RunMode::monte_carlo;
  s.shots = 4000;
  s.expect = {};
  s.seed = 11;
  const auto a = run_scenario(s, 1);
  const auto b = run_scenario(s, 3);
  EXPECT_EQ(csv_of(a), csv_of(b));
  EXPECT_EQ(run_record(a).dump(), run_record(b).dump());
  s.seed = 12;
  EXPECT_NE(csv_of(run_scenario(s)), csv_of(a));
}

TEST(Output, RecordAndWignerFiles) {
  const auto dir = scratch_dir("outputs");
  const auto r = run_scenario(bundled("ensemble_gain_offset"));
  write_outputs(dir, r);
  const auto rec = nlohmann::json::parse(read_file(dir / r.scenario.outputs.record));
  EXPECT_EQ(rec["scenario"], "ensemble_gain_offset");
  EXPECT_EQ(rec["engine_version"], kEngineVersion);
  EXPECT_TRUE(rec.contains("classical_ensemble_bound"));
  EXPECT_EQ(parse_scenario_string(rec["config"].get<std::string>()), r.scenario);
  const auto wig = read_file(dir / r.scenario.outputs.wigner);
  EXPECT_EQ(wig.rfind("scenario,clone_id,center_x,center_p,semi_major,semi_minor,angle\n", 0), 0u);
  EXPECT_EQ(std::count(wig.begin(), wig.end(), '\n'), 4);
  EXPECT_TRUE(fs::exists(dir / r.scenario.outputs.csv));
}

TEST(Expectations, ReportNamedFailures) {
  auto s = bundled("ideal");
  EXPECT_TRUE(check_expectations(run_scenario(s)).empty());
  s.expect.fidelity = ExpectEntry{{0.7}, 1e-3};
  const auto fails = check_expectations(run_scenario(s));
  ASSERT_EQ(fails.size(), 2u);
  EXPECT_EQ(fails[0].rfind("clone1.fidelity", 0), 0u);
}

TEST(Crosscheck, IdealPasses) {
  const auto rep = crosscheck(bundled("ideal"), {100000, 5, 1, 20});
  EXPECT_TRUE(rep.pass()) << ::testing::PrintToString(rep.failed());
  EXPECT_EQ(rep.items.size(), 8u);
}

TEST(Crosscheck, CorruptedGainIsNamed) {
  const auto s = bundled("ideal");
  auto bad = s.cloner;
  bad.gain_scale = 1.05;
  const auto in = std::get<CoherentInput>(s.input);
  const auto rep = crosscheck(s.cloner, bad, in.x, in.p, {100000, 5, 1, 20});
  EXPECT_FALSE(rep.pass());
  const auto failed = rep.failed();
  EXPECT_NE(std::find(failed.begin(), failed.end(), "clone1.gain_x"), failed.end());
}

TEST(Crosscheck, ClassicalVarianceIsThree) {
  const auto rep = crosscheck(bundled("classical"), {100000, 9, 1, 20});
  EXPECT_TRUE(rep.pass()) << ::testing::PrintToString(rep.failed());
  for (const auto& i : rep.items) {
    if (i.quantity.find("var_") != std::string::npos) {
      EXPECT_NEAR(i.monte_carlo, 3.0, 0.05) << i.quantity;
    }
  }
}

TEST(RunAll, ExitRanking) {
  EXPECT_EQ(worse_exit(kExitOk, kExitTolerance), kExitTolerance);
  EXPECT_EQ(worse_exit(kExitTolerance, kExitPhysics), kExitPhysics);
  EXPECT_EQ(worse_exit(kExitConfig, kExitPhysics), kExitConfig);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  const std::string scen = (kScenarios / "ideal.yaml").string();
  EXPECT_EQ(run_cli("run \"" + scen + "\""), 0);
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli("run \"" + scen + "\" --out \"" + (dir / "ideal").string() + "\""), 0);
  EXPECT_TRUE(fs::exists(dir / "ideal" / "ideal.csv"));
  EXPECT_EQ(run_cli("sweep \"" + scen + "\" --param cloner.gain_scale --grid 0.9,1,1.1"), 0);
  EXPECT_EQ(run_cli("crosscheck \"" + scen + "\" --shots 20000 --seed 3"), 0);
  EXPECT_EQ(run_cli("run-all \"" + kScenarios.string() + "\""), 0);

  EXPECT_EQ(run_cli("run \"" + (kData / "unknown_key.yaml").string() + "\""), 2);
  EXPECT_EQ(run_cli("run \"" + (dir / "absent.yaml").string() + "\""), 2);
  EXPECT_EQ(run_cli("sweep \"" + scen + "\" --param cloner.nope --grid 1"), 2);
  EXPECT_EQ(run_cli("run \"" + scen + "\" --format json"), 2);
  EXPECT_EQ(run_cli("launch"), 2);
  EXPECT_EQ(run_cli("run \"" + (kData / "unphysical_station.yaml").string() + "\""), 3);
  EXPECT_EQ(run_cli("run \"" + (kData / "wrong_expectation.yaml").string() + "\""), 4);
  EXPECT_EQ(run_cli("run-all \"" + kData.string() + "\""), 2);
}
