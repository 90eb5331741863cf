// clonesim: run cloner scenarios, sweeps and engine cross-checks.
//
//   clonesim run scenarios/ideal.yaml
//   clonesim sweep scenarios/symmetric_1toM.yaml --param cloner.clones --grid 2,3,4,5
//   clonesim crosscheck scenarios/classical.yaml --shots 100000 --seed 7
//   clonesim run-all scenarios --out results

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "clonesim/harness.hpp"

namespace {

using namespace clonesim;

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> shots;
  unsigned jobs = 1;
  std::string out;
  std::string format = "csv";
};

Scenario load(const std::string& path, const Common& opt) {
  Scenario s = load_scenario(path);
  if (opt.seed) s.seed = *opt.seed;
  if (opt.shots) s.shots = *opt.shots;
  s.validate();
  return s;
}

void report_time(const ScenarioResult& r) {
  std::cerr << r.scenario.name << ": " << r.wall_seconds << " s\n";
}

int report_failures(const std::string& name, const std::vector<std::string>& fails) {
  for (const auto& f : fails) std::cerr << name << ": " << f << "\n";
  return fails.empty() ? kExitOk : kExitTolerance;
}

int cmd_run(const std::string& file, const Common& opt) {
  const auto r = run_scenario(load(file, opt), opt.jobs);
  report_time(r);
  if (opt.out.empty()) {
    write_csv(std::cout, r);
  } else {
    write_outputs(opt.out, r);
  }
  return report_failures(r.scenario.name, check_expectations(r));
}

int cmd_sweep(const std::string& file, const std::string& param, const std::vector<std::string>& grid,
              const Common& opt) {
  const auto points = sweep(load(file, opt), param, grid, opt.jobs);
  if (opt.out.empty()) {
    write_sweep_csv(std::cout, param, points);
  } else {
    std::filesystem::create_directories(opt.out);
    const auto path = std::filesystem::path(opt.out) / (points.front().result.scenario.name + "_sweep.csv");
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    write_sweep_csv(f, param, points);
  }
  return kExitOk;
}

int cmd_crosscheck(const std::string& file, const Common& opt) {
  const Scenario s = load(file, opt);
  const MonteCarloOptions mc{opt.shots.value_or(100000), s.seed, opt.jobs, 20};
  const auto rep = crosscheck(s, mc);
  print_crosscheck(std::cout, s.name, rep);
  if (rep.pass()) {
    std::cout << s.name << " crosscheck PASS\n";
    return kExitOk;
  }
  std::cout << s.name << " crosscheck FAIL:";
  for (const auto& q : rep.failed()) std::cout << " " << q;
  std::cout << "\n";
  return kExitTolerance;
}

int classify(const std::exception_ptr& e, std::string& message) {
  try {
    std::rethrow_exception(e);
  } catch (const PhysicsError& ex) {
    message = ex.what();
    return kExitPhysics;
  } catch (const ConfigError& ex) {
    message = ex.what();
    return kExitConfig;
  } catch (const YAML::Exception& ex) {
    message = ex.what();
    return kExitConfig;
  } catch (const std::out_of_range& ex) {
    message = ex.what();
    return kExitConfig;
  }
}

int cmd_run_all(const std::string& dir, const Common& opt) {
  int code = kExitOk;
  for (const auto& file : scenario_files(dir)) {
    std::string status = "PASS";
    int c = kExitOk;
    std::string name = file.stem().string();
    try {
      const auto r = run_scenario(load(file.string(), opt), opt.jobs);
      name = r.scenario.name;
      report_time(r);
      if (!opt.out.empty()) write_outputs(opt.out, r);
      c = report_failures(name, check_expectations(r));
    } catch (...) {
      std::string msg;
      c = classify(std::current_exception(), msg);
      std::cerr << file.string() << ": " << msg << "\n";
    }
    if (c != kExitOk) status = "FAIL (exit " + std::to_string(c) + ")";
    std::cout << name << " " << status << "\n";
    code = worse_exit(code, c);
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear-optics Gaussian cloning machine simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Common opt;
  std::uint64_t seed = 0, shots = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Master RNG seed (overrides the scenario)");
  auto* shots_opt = app.add_option("--shots", shots, "Monte-Carlo shots (overrides the scenario)")->check(CLI::PositiveNumber);
  app.add_option("--jobs", opt.jobs, "Maximum worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", opt.out, "Write outputs into this directory instead of stdout");
  app.add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"csv"}));
  app.add_flag_callback("--version", [] {
    std::cout << "clonesim " << kEngineVersion << "\n";
    throw CLI::Success();
  });

  std::string file, param, dir;
  std::vector<std::string> grid;
  auto* run = app.add_subcommand("run", "Run one scenario file");
  run->add_option("file", file, "Scenario YAML")->required();
  auto* sw = app.add_subcommand("sweep", "Run a scenario over a grid of values for one parameter");
  sw->add_option("file", file, "Scenario YAML")->required();
  sw->add_option("--param", param, "Dotted path into the scenario, e.g. cloner.gain_scale")->required();
  sw->add_option("--grid", grid, "Comma-separated values")->required()->delimiter(',');
  auto* cc = app.add_subcommand("crosscheck", "Compare Monte-Carlo against the analytic engine");
  cc->add_option("file", file, "Scenario YAML")->required();
  auto* all = app.add_subcommand("run-all", "Run every scenario in a directory and check expectations");
  all->add_option("dir", dir, "Scenario directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  if (*seed_opt) opt.seed = seed;
  if (*shots_opt) opt.shots = shots;

  try {
    if (*run) return cmd_run(file, opt);
    if (*sw) return cmd_sweep(file, param, grid, opt);
    if (*cc) return cmd_crosscheck(file, opt);
    return cmd_run_all(dir, opt);
  } catch (...) {
    std::string msg;
    try {
      const int code = classify(std::current_exception(), msg);
      std::cerr << "error: " << msg << "\n";
      return code;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
}
