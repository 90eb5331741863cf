#pragma once

// Scenario files: a YAML document describing one cloner run.
//
//   name: experimental
//   cloner:
//     variant: experimental_1to2          # see Variant
//     tap_transmittance: 0.5              # or auto
//     output_ratio: 0.5                   # asymmetric_1to2 only
//     clones: 2                           # symmetric_1toM / classical
//     coupler_transmittance: 1
//     gains: auto                         # or [{x: .., p: ..}, ...]
//     gain_scale: 1
//     ff_detector: {quantum_efficiency: 0.95, visibility: 0.99, electronic_noise_db: -25}
//     verify_detectors: [{quantum_efficiency: 0.785}, {quantum_efficiency: 0.775}]
//   input: {coherent: {x: 12, p: 10.19804}}   # or {ensemble: {nbar: 50}}
//   mode: analytic                        # or monte_carlo
//   shots: 100000
//   seed: 1
//   outputs: {csv: experimental.csv, record: experimental.json, wigner: experimental_wigner.csv}
//   expect:
//     fidelity: {value: 0.6506, tol: 0.002}   # value may be a per-clone list
//
// Unknown keys are rejected. A detector's electronic noise is given either
// linearly (electronic_noise, shot-noise units) or in dB (electronic_noise_db).

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "clonesim/cloner.hpp"
#include "clonesim/errors.hpp"
#include "clonesim/metrics.hpp"

namespace clonesim {

struct CoherentInput {
  double x = 0.0;
  double p = 0.0;
  bool operator==(const CoherentInput&) const = default;
};

using InputSpec = std::variant<CoherentInput, EnsembleSpec>;

enum class RunMode { analytic, monte_carlo };

inline std::string to_string(RunMode m) { return m == RunMode::analytic ? "analytic" : "monte_carlo"; }

/// Expected value with absolute tolerance; one value for every clone or one
/// per clone.
struct ExpectEntry {
  std::vector<double> values;
  double tol = 0.0;

  double at(std::size_t clone) const { return values.size() == 1 ? values[0] : values.at(clone); }
  bool operator==(const ExpectEntry&) const = default;
};

struct Expectations {
  std::optional<ExpectEntry> fidelity;
  std::optional<ExpectEntry> added_db;
  std::optional<ExpectEntry> variance;
  std::optional<ExpectEntry> gain;
  std::optional<ExpectEntry> tap;

  bool empty() const { return !fidelity && !added_db && !variance && !gain && !tap; }
  bool operator==(const Expectations&) const = default;
};

struct OutputPaths {
  std::string csv;
  std::string record;
  std::string wigner;
  bool operator==(const OutputPaths&) const = default;
};

struct Scenario {
  std::string name;
  ClonerConfig cloner;
  InputSpec input = CoherentInput{};
  RunMode mode = RunMode::analytic;
  std::uint64_t shots = 100000;
  std::uint64_t seed = 1;
  OutputPaths outputs;
  Expectations expect;

  bool operator==(const Scenario&) const = default;

  void validate() const {
    if (name.empty()) throw ConfigError("scenario: name must not be empty");
    cloner.validate();
    if (const auto* e = std::get_if<EnsembleSpec>(&input)) {
      e->validate();
      if (mode != RunMode::analytic) throw ConfigError("scenario: ensemble inputs run in analytic mode only");
    }
    if (mode == RunMode::monte_carlo && shots < 40) throw ConfigError("scenario: monte_carlo needs at least 40 shots");
    const std::size_t m = cloner.n_clones();
    for (const auto* e : {&expect.fidelity, &expect.added_db, &expect.variance, &expect.gain}) {
      if (*e && (*e)->values.size() != 1 && (*e)->values.size() != m) {
        throw ConfigError("scenario: expect lists must have one value or one per clone");
      }
    }
    if (expect.tap && expect.tap->values.size() != 1) throw ConfigError("scenario: expect.tap takes a single value");
  }
};

namespace detail {

inline void require_map(const YAML::Node& n, const std::string& where) {
  if (!n.IsMap()) throw ConfigError(where + ": expected a mapping");
}

inline void check_keys(const YAML::Node& n, const std::string& where, std::initializer_list<const char*> allowed) {
  require_map(n, where);
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const YAML::Node& n, const std::string& where) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": cannot read value '" + (n.IsScalar() ? n.Scalar() : std::string("<non-scalar>")) +
                      "'");
  }
}

template <typename T>
T get_or(const YAML::Node& parent, const char* key, const std::string& where, T fallback) {
  const YAML::Node n = parent[key];
  return n ? get<T>(n, where + "." + key) : fallback;
}

inline bool is_auto(const YAML::Node& n) { return n.IsScalar() && n.Scalar() == "auto"; }

inline DetectorModel parse_detector(const YAML::Node& n, const std::string& where) {
  check_keys(n, where, {"quantum_efficiency", "visibility", "electronic_noise", "electronic_noise_db"});
  DetectorModel d;
  d.quantum_efficiency = get_or(n, "quantum_efficiency", where, 1.0);
  d.visibility = get_or(n, "visibility", where, 1.0);
  if (n["electronic_noise"] && n["electronic_noise_db"]) {
    throw ConfigError(where + ": give electronic_noise or electronic_noise_db, not both");
  }
  if (n["electronic_noise"]) d.electronic_noise = get<double>(n["electronic_noise"], where + ".electronic_noise");
  if (n["electronic_noise_db"]) {
    d.electronic_noise = DetectorModel::noise_from_db(get<double>(n["electronic_noise_db"], where + ".electronic_noise_db"));
  }
  return d;
}

inline ClonerConfig parse_cloner(const YAML::Node& n) {
  const std::string w = "cloner";
  check_keys(n, w,
             {"variant", "tap_transmittance", "output_ratio", "clones", "coupler_transmittance", "gains", "gain_scale",
              "ff_detector", "verify_detectors"});
  ClonerConfig c;
  if (!n["variant"]) throw ConfigError("cloner: missing 'variant'");
  c.variant = parse_variant(get<std::string>(n["variant"], w + ".variant"));
  if (const auto t = n["tap_transmittance"]) {
    c.tap_transmittance = is_auto(t) ? std::nullopt : std::optional<double>(get<double>(t, w + ".tap_transmittance"));
  }
  c.output_ratio = get_or(n, "output_ratio", w, c.output_ratio);
  c.clones = get_or(n, "clones", w, c.clones);
  c.coupler_transmittance = get_or(n, "coupler_transmittance", w, c.coupler_transmittance);
  c.gain_scale = get_or(n, "gain_scale", w, c.gain_scale);
  if (const auto g = n["gains"]; g && !is_auto(g)) {
    if (!g.IsSequence()) throw ConfigError("cloner.gains: expected 'auto' or a list of {x, p}");
    std::vector<FeedforwardGain> gains;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::string wi = w + ".gains[" + std::to_string(i) + "]";
      check_keys(g[i], wi, {"x", "p"});
      if (!g[i]["x"] || !g[i]["p"]) throw ConfigError(wi + ": needs both x and p");
      gains.push_back({get<double>(g[i]["x"], wi + ".x"), get<double>(g[i]["p"], wi + ".p")});
    }
    c.gains = std::move(gains);
  }
  if (n["ff_detector"]) c.ff_detector = parse_detector(n["ff_detector"], w + ".ff_detector");
  if (const auto v = n["verify_detectors"]) {
    if (!v.IsSequence()) throw ConfigError("cloner.verify_detectors: expected a list");
    c.verify_detectors.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      c.verify_detectors.push_back(parse_detector(v[i], w + ".verify_detectors[" + std::to_string(i) + "]"));
    }
  }
  return c;
}

inline InputSpec parse_input(const YAML::Node& n) {
  check_keys(n, "input", {"coherent", "ensemble"});
  if (n.size() != 1) throw ConfigError("input: give exactly one of 'coherent' or 'ensemble'");
  if (const auto c = n["coherent"]) {
    check_keys(c, "input.coherent", {"x", "p"});
    return CoherentInput{get_or(c, "x", "input.coherent", 0.0), get_or(c, "p", "input.coherent", 0.0)};
  }
  const auto e = n["ensemble"];
  check_keys(e, "input.ensemble", {"nbar", "variance_per_photon"});
  if (!e["nbar"]) throw ConfigError("input.ensemble: missing 'nbar'");
  EnsembleSpec spec;
  spec.nbar = get<double>(e["nbar"], "input.ensemble.nbar");
  spec.variance_per_photon = get_or(e, "variance_per_photon", "input.ensemble", spec.variance_per_photon);
  return spec;
}

inline ExpectEntry parse_expect_entry(const YAML::Node& n, const std::string& where) {
  check_keys(n, where, {"value", "tol"});
  if (!n["value"] || !n["tol"]) throw ConfigError(where + ": needs 'value' and 'tol'");
  ExpectEntry e;
  if (n["value"].IsSequence()) {
    for (const auto& v : n["value"]) e.values.push_back(get<double>(v, where + ".value"));
  } else {
    e.values.push_back(get<double>(n["value"], where + ".value"));
  }
  if (e.values.empty()) throw ConfigError(where + ": empty value list");
  e.tol = get<double>(n["tol"], where + ".tol");
  if (!(e.tol >= 0.0)) throw ConfigError(where + ": tol must be >= 0");
  return e;
}

inline Expectations parse_expect(const YAML::Node& n) {
  check_keys(n, "expect", {"fidelity", "added_db", "variance", "gain", "tap"});
  Expectations x;
  auto one = [&](const char* key, std::optional<ExpectEntry>& slot) {
    if (n[key]) slot = parse_expect_entry(n[key], std::string("expect.") + key);
  };
  one("fidelity", x.fidelity);
  one("added_db", x.added_db);
  one("variance", x.variance);
  one("gain", x.gain);
  one("tap", x.tap);
  return x;
}

}  // namespace detail

inline Scenario parse_scenario(const YAML::Node& root) {
  detail::check_keys(root, "scenario", {"name", "cloner", "input", "mode", "shots", "seed", "outputs", "expect"});
  Scenario s;
  if (!root["name"]) throw ConfigError("scenario: missing 'name'");
  if (!root["cloner"]) throw ConfigError("scenario: missing 'cloner'");
  s.name = detail::get<std::string>(root["name"], "name");
  s.cloner = detail::parse_cloner(root["cloner"]);
  if (root["input"]) s.input = detail::parse_input(root["input"]);
  if (const auto m = root["mode"]) {
    const auto mode = detail::get<std::string>(m, "mode");
    if (mode == "analytic") {
      s.mode = RunMode::analytic;
    } else if (mode == "monte_carlo") {
      s.mode = RunMode::monte_carlo;
    } else {
      throw ConfigError("mode: expected 'analytic' or 'monte_carlo', got '" + mode + "'");
    }
  }
  s.shots = detail::get_or<std::uint64_t>(root, "shots", "scenario", s.shots);
  s.seed = detail::get_or<std::uint64_t>(root, "seed", "scenario", s.seed);
  s.outputs = {s.name + ".csv", s.name + ".json", s.name + "_wigner.csv"};
  if (const auto o = root["outputs"]) {
    detail::check_keys(o, "outputs", {"csv", "record", "wigner"});
    s.outputs.csv = detail::get_or(o, "csv", "outputs", s.outputs.csv);
    s.outputs.record = detail::get_or(o, "record", "outputs", s.outputs.record);
    s.outputs.wigner = detail::get_or(o, "wigner", "outputs", s.outputs.wigner);
  }
  if (root["expect"]) s.expect = detail::parse_expect(root["expect"]);
  s.validate();
  return s;
}

inline Scenario parse_scenario_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("scenario: YAML parse error: ") + e.what());
  }
  return parse_scenario(root);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario_string(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace detail {

inline void emit_detector(YAML::Emitter& out, const DetectorModel& d) {
  out << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "quantum_efficiency" << YAML::Value << d.quantum_efficiency;
  out << YAML::Key << "visibility" << YAML::Value << d.visibility;
  out << YAML::Key << "electronic_noise" << YAML::Value << d.electronic_noise;
  out << YAML::EndMap;
}

inline void emit_expect(YAML::Emitter& out, const char* key, const std::optional<ExpectEntry>& e) {
  if (!e) return;
  out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "value" << YAML::Value;
  if (e->values.size() == 1) {
    out << e->values[0];
  } else {
    out << YAML::Flow << e->values;
  }
  out << YAML::Key << "tol" << YAML::Value << e->tol << YAML::EndMap;
}

}  // namespace detail

/// Canonical YAML with every field spelled out; parse_scenario_string of the
/// result compares equal to `s`.
inline std::string emit_scenario(const Scenario& s) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << s.name;

  const auto& c = s.cloner;
  out << YAML::Key << "cloner" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "variant" << YAML::Value << to_string(c.variant);
  out << YAML::Key << "tap_transmittance" << YAML::Value;
  if (c.tap_transmittance) {
    out << *c.tap_transmittance;
  } else {
    out << "auto";
  }
  out << YAML::Key << "output_ratio" << YAML::Value << c.output_ratio;
  out << YAML::Key << "clones" << YAML::Value << c.clones;
  out << YAML::Key << "coupler_transmittance" << YAML::Value << c.coupler_transmittance;
  out << YAML::Key << "gains" << YAML::Value;
  if (c.gains) {
    out << YAML::BeginSeq;
    for (const auto& g : *c.gains) {
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "x" << YAML::Value << g.x << YAML::Key << "p"
          << YAML::Value << g.p << YAML::EndMap;
    }
    out << YAML::EndSeq;
  } else {
    out << "auto";
  }
  out << YAML::Key << "gain_scale" << YAML::Value << c.gain_scale;
  out << YAML::Key << "ff_detector" << YAML::Value;
  detail::emit_detector(out, c.ff_detector);
  out << YAML::Key << "verify_detectors" << YAML::Value << YAML::BeginSeq;
  for (const auto& d : c.verify_detectors) detail::emit_detector(out, d);
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "input" << YAML::Value << YAML::BeginMap;
  if (const auto* ci = std::get_if<CoherentInput>(&s.input)) {
    out << YAML::Key << "coherent" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "x"
        << YAML::Value << ci->x << YAML::Key << "p" << YAML::Value << ci->p << YAML::EndMap;
  } else {
    const auto& e = std::get<EnsembleSpec>(s.input);
    out << YAML::Key << "ensemble" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "nbar"
        << YAML::Value << e.nbar << YAML::Key << "variance_per_photon" << YAML::Value << e.variance_per_photon
        << YAML::EndMap;
  }
  out << YAML::EndMap;

  out << YAML::Key << "mode" << YAML::Value << to_string(s.mode);
  out << YAML::Key << "shots" << YAML::Value << s.shots;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::Key << "outputs" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "csv" << YAML::Value << s.outputs.csv;
  out << YAML::Key << "record" << YAML::Value << s.outputs.record;
  out << YAML::Key << "wigner" << YAML::Value << s.outputs.wigner;
  out << YAML::EndMap;
  if (!s.expect.empty()) {
    out << YAML::Key << "expect" << YAML::Value << YAML::BeginMap;
    detail::emit_expect(out, "fidelity", s.expect.fidelity);
    detail::emit_expect(out, "added_db", s.expect.added_db);
    detail::emit_expect(out, "variance", s.expect.variance);
    detail::emit_expect(out, "gain", s.expect.gain);
    detail::emit_expect(out, "tap", s.expect.tap);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

/// Copy of `s` with the field at dotted `path` (e.g. cloner.ff_detector.
/// quantum_efficiency, cloner.verify_detectors.0.visibility) replaced by the
/// YAML scalar `value`. The path must exist in the canonical form.
inline Scenario with_override(const Scenario& s, const std::string& path, const std::string& value) {
  YAML::Node root = YAML::Load(emit_scenario(s));
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  if (parts.empty()) throw ConfigError("sweep: empty parameter path");

  YAML::Node cur = root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next;
    if (cur.IsMap() && cur[parts[i]]) {
      next = cur[parts[i]];
    } else if (cur.IsSequence()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(parts[i]);
      } catch (const std::exception&) {
        throw ConfigError("sweep: '" + parts[i] + "' is not a list index in '" + path + "'");
      }
      if (idx >= cur.size()) throw ConfigError("sweep: index " + parts[i] + " out of range in '" + path + "'");
      next = cur[idx];
    } else {
      throw ConfigError("sweep: parameter path '" + path + "' does not exist");
    }
    cur.reset(next);
  }
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception&) {
    throw ConfigError("sweep: cannot parse grid value '" + value + "'");
  }
  const std::string& leaf = parts.back();
  if (cur.IsMap() && cur[leaf]) {
    cur[leaf] = parsed;
  } else if (cur.IsSequence()) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(leaf);
    } catch (const std::exception&) {
      throw ConfigError("sweep: parameter path '" + path + "' does not exist");
    }
    if (idx >= cur.size()) throw ConfigError("sweep: parameter path '" + path + "' does not exist");
    cur[idx] = parsed;
  } else {
    throw ConfigError("sweep: parameter path '" + path + "' does not exist");
  }
  return parse_scenario(root);
}

}  // namespace clonesim
