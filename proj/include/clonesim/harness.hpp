#pragma once

// Batch front end: runs scenarios, checks their expectations, compares the
// Monte-Carlo engine against the analytic one, and writes CSV / JSON.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "clonesim/cloner.hpp"
#include "clonesim/errors.hpp"
#include "clonesim/metrics.hpp"
#include "clonesim/scenario.hpp"
#include "clonesim/version.hpp"

namespace clonesim {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitPhysics = 3, kExitTolerance = 4 };

struct ScenarioResult {
  Scenario scenario;
  ClonerRun run;
  /// Gain-optimized measure-and-prepare average fidelity (ensemble inputs).
  std::optional<double> classical_bound;
  double wall_seconds = 0.0;
};

/// Coherent input a scenario is run at. Ensemble scenarios are evaluated at
/// the origin for their gains and variances; `probe_input` is the state used
/// where a single input is needed (Monte-Carlo comparisons, Wigner export).
inline CoherentInput probe_input(const Scenario& s) {
  if (const auto* c = std::get_if<CoherentInput>(&s.input)) return *c;
  const double a = std::sqrt(2.0 * std::get<EnsembleSpec>(s.input).nbar);
  return {a, a};
}

inline ScenarioResult run_scenario(const Scenario& s, unsigned jobs = 1) {
  s.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioResult r;
  r.scenario = s;
  if (const auto* e = std::get_if<EnsembleSpec>(&s.input)) {
    r.run = run_cloner_analytic(s.cloner, 0.0, 0.0);
    for (auto& c : r.run.report.clones) {
      c.fidelity = average_fidelity_over_ensemble({c.gain_x, c.gain_p, c.var_x, c.var_p}, *e);
    }
    r.classical_bound = classical_ensemble_bound(*e).fidelity;
    r.run.report.flags.push_back("fidelity is the ensemble average: " + e->convention());
  } else {
    const auto in = std::get<CoherentInput>(s.input);
    std::optional<MonteCarloOptions> mc;
    if (s.mode == RunMode::monte_carlo) mc = MonteCarloOptions{s.shots, s.seed, jobs, 20};
    r.run = run_cloner(s.cloner, in.x, in.p, mc);
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// One line per violated expectation; empty when everything is in tolerance.
inline std::vector<std::string> check_expectations(const ScenarioResult& r) {
  std::vector<std::string> fails;
  const auto& ex = r.scenario.expect;
  auto check = [&](const std::string& what, double got, double want, double tol) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream os;
      os.precision(9);
      os << what << " = " << got << ", expected " << want << " +- " << tol;
      fails.push_back(os.str());
    }
  };
  const auto& clones = r.run.report.clones;
  for (std::size_t k = 0; k < clones.size(); ++k) {
    const auto& c = clones[k];
    const std::string id = "clone" + std::to_string(c.id) + ".";
    if (ex.fidelity) check(id + "fidelity", c.fidelity, ex.fidelity->at(k), ex.fidelity->tol);
    if (ex.added_db) {
      check(id + "added_db_x", c.added_db_x, ex.added_db->at(k), ex.added_db->tol);
      check(id + "added_db_p", c.added_db_p, ex.added_db->at(k), ex.added_db->tol);
    }
    if (ex.variance) {
      check(id + "var_x", c.var_x, ex.variance->at(k), ex.variance->tol);
      check(id + "var_p", c.var_p, ex.variance->at(k), ex.variance->tol);
    }
    if (ex.gain) {
      check(id + "gain_x", c.gain_x, ex.gain->at(k), ex.gain->tol);
      check(id + "gain_p", c.gain_p, ex.gain->at(k), ex.gain->tol);
    }
  }
  if (ex.tap) check("tap", r.run.report.tap, ex.tap->at(0), ex.tap->tol);
  return fails;
}

// ---- output ----------------------------------------------------------------

/// 9 significant digits, '.' separator, independent of the locale.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{"scenario",   "clone_id",   "gain_x",   "gain_p",      "var_x",
                                             "var_p",      "added_db_x", "added_db_p", "fidelity", "fidelity_err"};
  return cols;
}

inline std::string csv_header() {
  std::string h;
  for (const auto& c : csv_columns()) h += (h.empty() ? "" : ",") + c;
  return h;
}

inline std::string csv_row(const std::string& scenario, const CloneResult& c) {
  std::string row = scenario + "," + std::to_string(c.id);
  for (double v : {c.gain_x, c.gain_p, c.var_x, c.var_p, c.added_db_x, c.added_db_p, c.fidelity, c.fidelity_err}) {
    row += "," + format_number(v);
  }
  return row;
}

inline void write_csv(std::ostream& os, const ScenarioResult& r) {
  os << csv_header() << "\n";
  for (const auto& c : r.run.report.clones) os << csv_row(r.scenario.name, c) << "\n";
}

/// 1σ Wigner contours of the input and of each clone.
inline void write_wigner_csv(std::ostream& os, const ScenarioResult& r) {
  os << "scenario,clone_id,center_x,center_p,semi_major,semi_minor,angle\n";
  auto line = [&](std::size_t id, const WignerEllipse& e) {
    os << r.scenario.name << "," << id << "," << format_number(e.center(0)) << "," << format_number(e.center(1)) << ","
       << format_number(e.semi_major) << "," << format_number(e.semi_minor) << "," << format_number(e.angle) << "\n";
  };
  const bool ensemble = std::holds_alternative<EnsembleSpec>(r.scenario.input);
  const auto in = ensemble ? CoherentInput{} : probe_input(r.scenario);
  line(0, wigner_contour(coherent_state(in.x, in.p)));
  for (std::size_t k = 0; k < r.run.clone_states.size(); ++k) line(k + 1, wigner_contour(r.run.clone_states[k]));
}

namespace detail {

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace detail

/// Everything a run produced; identical scenario and seed give an identical
/// record (wall time is reported separately).
inline nlohmann::json run_record(const ScenarioResult& r) {
  using nlohmann::json;
  const auto& rep = r.run.report;
  json clones = json::array();
  for (const auto& c : rep.clones) {
    clones.push_back({{"clone_id", c.id},
                      {"gain_x", detail::number_or_null(c.gain_x)},
                      {"gain_p", detail::number_or_null(c.gain_p)},
                      {"mean", {c.mean(0), c.mean(1)}},
                      {"cov", {{c.cov(0, 0), c.cov(0, 1)}, {c.cov(1, 0), c.cov(1, 1)}}},
                      {"station_raw", {c.station.raw_x, c.station.raw_p}},
                      {"var_x", c.var_x},
                      {"var_p", c.var_p},
                      {"added_db_x", c.added_db_x},
                      {"added_db_p", c.added_db_p},
                      {"fidelity", c.fidelity},
                      {"fidelity_err", c.fidelity_err},
                      {"mean_err", {c.mean_err(0), c.mean_err(1)}},
                      {"var_err", {c.var_err(0), c.var_err(1)}}});
  }
  json gains = json::array();
  for (const auto& g : rep.gains) gains.push_back({{"x", g.x}, {"p", g.p}});
  json rec{{"scenario", r.scenario.name},
           {"engine_version", kEngineVersion},
           {"mode", to_string(r.scenario.mode)},
           {"seed", r.scenario.seed},
           {"shots", r.scenario.mode == RunMode::monte_carlo ? json(r.scenario.shots) : json()},
           {"variant", to_string(r.scenario.cloner.variant)},
           {"tap_transmittance", rep.tap},
           {"feedforward_gains", gains},
           {"min_physical_eigenvalue", rep.min_physical_eigenvalue},
           {"flags", rep.flags},
           {"clones", clones},
           {"config", emit_scenario(r.scenario)}};
  if (r.classical_bound) rec["classical_ensemble_bound"] = *r.classical_bound;
  return rec;
}

/// Writes the scenario's CSV, JSON record and Wigner CSV under `dir`.
inline void write_outputs(const std::filesystem::path& dir, const ScenarioResult& r) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw ConfigError("cannot write '" + (dir / name).string() + "'");
    return f;
  };
  {
    auto f = open(r.scenario.outputs.csv);
    write_csv(f, r);
  }
  {
    auto f = open(r.scenario.outputs.record);
    f << run_record(r).dump(2) << "\n";
  }
  {
    auto f = open(r.scenario.outputs.wigner);
    write_wigner_csv(f, r);
  }
}

// ---- sweep -----------------------------------------------------------------

struct SweepPoint {
  std::string value;
  ScenarioResult result;
};

/// Runs `s` with `path` set to each grid value, up to `jobs` points at once.
/// Results come back in grid order.
inline std::vector<SweepPoint> sweep(const Scenario& s, const std::string& path, const std::vector<std::string>& grid,
                                     unsigned jobs = 1) {
  if (grid.empty()) throw ConfigError("sweep: empty grid");
  std::vector<Scenario> points;
  for (const auto& v : grid) points.push_back(with_override(s, path, v));

  std::vector<SweepPoint> out(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        out[i] = {grid[i], run_scenario(points[i])};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(grid.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < n; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

inline void write_sweep_csv(std::ostream& os, const std::string& path, const std::vector<SweepPoint>& points) {
  os << "parameter,value," << csv_header() << "\n";
  for (const auto& pt : points) {
    for (const auto& c : pt.result.run.report.clones) {
      os << path << "," << pt.value << "," << csv_row(pt.result.scenario.name, c) << "\n";
    }
  }
}

// ---- crosscheck ------------------------------------------------------------

struct CrosscheckItem {
  std::string quantity;  // e.g. "clone1.gain_x"
  double analytic;
  double monte_carlo;
  double tolerance;
  bool pass;
};

struct CrosscheckReport {
  std::vector<CrosscheckItem> items;
  bool pass() const {
    return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.pass; });
  }
  std::vector<std::string> failed() const {
    std::vector<std::string> names;
    for (const auto& i : items) {
      if (!i.pass) names.push_back(i.quantity);
    }
    return names;
  }
};

inline constexpr double kCrosscheckMeanSigmas = 4.0;
inline constexpr double kCrosscheckVarianceRel = 0.05;

/// Analytic run of `analytic_cfg` against a Monte-Carlo run of `mc_cfg` at
/// the same input. Means are compared as gains where the input quadrature is
/// non-zero (within 4 standard errors), variances within 5% relative.
inline CrosscheckReport crosscheck(const ClonerConfig& analytic_cfg, const ClonerConfig& mc_cfg, double x, double p,
                                   const MonteCarloOptions& opt) {
  const auto an = run_cloner_analytic(analytic_cfg, x, p).report;
  const auto mc = run_cloner_monte_carlo(mc_cfg, x, p, opt).report;
  if (an.clones.size() != mc.clones.size()) throw ConfigError("crosscheck: configurations differ in clone count");
  CrosscheckReport rep;
  auto add = [&](std::string q, double a, double m, double tol) {
    rep.items.push_back({std::move(q), a, m, tol, std::abs(a - m) <= tol});
  };
  for (std::size_t k = 0; k < an.clones.size(); ++k) {
    const auto& a = an.clones[k];
    const auto& m = mc.clones[k];
    const std::string id = "clone" + std::to_string(a.id) + ".";
    const double in[2] = {x, p};
    const char* quad[2] = {"x", "p"};
    for (int q = 0; q < 2; ++q) {
      const double se = kCrosscheckMeanSigmas * m.mean_err(q);
      if (in[q] != 0.0) {
        add(id + "gain_" + quad[q], a.mean(q) / in[q], m.mean(q) / in[q], se / std::abs(in[q]));
      } else {
        add(id + "mean_" + quad[q], a.mean(q), m.mean(q), se);
      }
    }
    add(id + "var_x", a.var_x, m.var_x, kCrosscheckVarianceRel * a.var_x);
    add(id + "var_p", a.var_p, m.var_p, kCrosscheckVarianceRel * a.var_p);
  }
  return rep;
}

inline CrosscheckReport crosscheck(const Scenario& s, const MonteCarloOptions& opt) {
  s.validate();
  const auto in = probe_input(s);
  return crosscheck(s.cloner, s.cloner, in.x, in.p, opt);
}

inline void print_crosscheck(std::ostream& os, const std::string& name, const CrosscheckReport& rep) {
  for (const auto& i : rep.items) {
    os << name << " " << i.quantity << " analytic=" << format_number(i.analytic)
       << " monte_carlo=" << format_number(i.monte_carlo) << " tol=" << format_number(i.tolerance) << " "
       << (i.pass ? "ok" : "MISMATCH") << "\n";
  }
}

// ---- run-all ---------------------------------------------------------------

inline std::vector<std::filesystem::path> scenario_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".yaml" || ext == ".yml")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

/// Combines exit codes: a config error outranks a physics violation, which
/// outranks a tolerance failure.
inline int worse_exit(int a, int b) {
  auto rank = [](int c) {
    switch (c) {
      case kExitConfig: return 3;
      case kExitPhysics: return 2;
      case kExitTolerance: return 1;
      default: return c == kExitOk ? 0 : 4;
    }
  };
  return rank(a) >= rank(b) ? a : b;
}

}  // namespace clonesim
