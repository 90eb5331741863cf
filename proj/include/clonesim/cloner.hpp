#pragma once

// Linear-optics cloners for coherent states.
//
// Quantum variants share one front end: the input is split at BS1 (tap
// transmittance t toward the kept arm), the other arm is dual-homodyned, and
// the photocurrents drive displacements. Symmetric variants displace the
// kept arm and then split it into M clones; the asymmetric variant splits
// first (ratio r to clone 1) and displaces each clone with its own gain.
// The classical variant dual-homodynes the whole input and prepares fresh
// coherent states at the scaled outcomes.

#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "clonesim/circuit.hpp"
#include "clonesim/engines.hpp"
#include "clonesim/errors.hpp"
#include "clonesim/gaussian.hpp"
#include "clonesim/measurement.hpp"
#include "clonesim/metrics.hpp"
#include "clonesim/optimize.hpp"
#include "clonesim/rng.hpp"

namespace clonesim {

enum class Variant { ideal_1to2, experimental_1to2, classical, asymmetric_1to2, symmetric_1toM };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::ideal_1to2: return "ideal_1to2";
    case Variant::experimental_1to2: return "experimental_1to2";
    case Variant::classical: return "classical";
    case Variant::asymmetric_1to2: return "asymmetric_1to2";
    case Variant::symmetric_1toM: return "symmetric_1toM";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (auto v : {Variant::ideal_1to2, Variant::experimental_1to2, Variant::classical, Variant::asymmetric_1to2,
                 Variant::symmetric_1toM}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown cloner variant '" + s + "'");
}

struct ClonerConfig {
  Variant variant = Variant::ideal_1to2;
  /// BS1 transmittance toward the kept arm; nullopt = optimize.
  std::optional<double> tap_transmittance = 0.5;
  /// Fraction of the kept arm sent to clone 1 (asymmetric only).
  double output_ratio = 0.5;
  /// Number of clones (symmetric_1toM and classical).
  int clones = 2;
  DetectorModel ff_detector;
  /// Transmittance of the displacement coupler seen by the signal; 1 is an
  /// ideal displacement.
  double coupler_transmittance = 1.0;
  /// Feed-forward gains per stage; nullopt = calibrate for unity transfer.
  std::optional<std::vector<FeedforwardGain>> gains;
  /// Multiplier applied to calibrated gains.
  double gain_scale = 1.0;
  /// Verification station for clone k is verify_detectors[min(k, size-1)].
  std::vector<DetectorModel> verify_detectors{DetectorModel{}, DetectorModel{}};

  bool operator==(const ClonerConfig&) const = default;

  std::size_t n_clones() const {
    switch (variant) {
      case Variant::ideal_1to2:
      case Variant::experimental_1to2:
      case Variant::asymmetric_1to2: return 2;
      case Variant::classical:
      case Variant::symmetric_1toM: return static_cast<std::size_t>(clones);
    }
    return 0;
  }
  std::size_t n_stages() const { return variant == Variant::asymmetric_1to2 ? 2 : 1; }

  const DetectorModel& verify_detector(std::size_t clone) const {
    return verify_detectors[std::min(clone, verify_detectors.size() - 1)];
  }

  void validate() const {
    ff_detector.validate();
    if (verify_detectors.empty()) throw ConfigError("config: verify_detectors must not be empty");
    for (const auto& d : verify_detectors) d.validate();
    if (tap_transmittance && !(*tap_transmittance >= 0.0 && *tap_transmittance <= 1.0)) {
      throw ConfigError("config: tap_transmittance must lie in [0, 1]");
    }
    if (!(coupler_transmittance > 0.0 && coupler_transmittance <= 1.0)) {
      throw ConfigError("config: coupler_transmittance must lie in (0, 1]");
    }
    if (!std::isfinite(gain_scale)) throw ConfigError("config: gain_scale must be finite");
    switch (variant) {
      case Variant::ideal_1to2:
        if (!ff_detector.is_ideal() || coupler_transmittance != 1.0) {
          throw ConfigError("config: ideal_1to2 requires an ideal ff_detector and coupler (use experimental_1to2)");
        }
        [[fallthrough]];
      case Variant::experimental_1to2:
        if (clones != 2) throw ConfigError("config: 1->2 variants produce exactly 2 clones");
        break;
      case Variant::symmetric_1toM:
        if (clones < 2) throw ConfigError("config: symmetric_1toM requires clones >= 2");
        break;
      case Variant::classical:
        if (clones < 1) throw ConfigError("config: classical requires clones >= 1");
        break;
      case Variant::asymmetric_1to2:
        if (!(output_ratio >= 0.0 && output_ratio <= 1.0)) {
          throw ConfigError("config: output_ratio must lie in [0, 1]");
        }
        if (clones != 2) throw ConfigError("config: asymmetric_1to2 produces exactly 2 clones");
        break;
    }
    if (gains && gains->size() != n_stages()) {
      throw ConfigError("config: expected " + std::to_string(n_stages()) + " feed-forward gain pair(s)");
    }
  }
};

/// Where to stop building: the full cloner, or just before the kept arm is
/// split into clones (symmetric variants only).
enum class BuildStop { clones, displaced_beam };

inline circuit::Circuit build_circuit(const ClonerConfig& cfg, double tap, std::span<const FeedforwardGain> gains,
                                      BuildStop stop = BuildStop::clones) {
  if (gains.size() != cfg.n_stages()) throw ConfigError("build_circuit: wrong number of gain pairs");
  circuit::Circuit c(1);
  const auto in = c.input(0);
  std::vector<circuit::ModeId> clones;

  if (cfg.variant == Variant::classical) {
    if (stop != BuildStop::clones) throw ConfigError("build_circuit: classical cloner has no displaced beam");
    const auto [rx, rp] = c.dual_homodyne(in, cfg.ff_detector, "v1", "ff");
    for (int k = 0; k < cfg.clones; ++k) {
      const auto m = c.add_vacuum("prep" + std::to_string(k + 1));
      c.feedforward(m, rx, rp, gains[0], 0);
      clones.push_back(m);
    }
    c.set_outputs(clones);
    return c;
  }

  // BS1: kept arm √t·in + √(1-t)·v1 lives on v1's slot, the measured arm
  // √(1-t)·in - √t·v1 on the input's slot.
  const auto kept = c.add_vacuum("v1");
  c.beam_splitter(kept, in, 1.0 - tap);
  const auto [rx, rp] = c.dual_homodyne(in, cfg.ff_detector, "v2", "ff");

  if (cfg.variant == Variant::asymmetric_1to2) {
    if (stop != BuildStop::clones) throw ConfigError("build_circuit: asymmetric cloner displaces after the split");
    const auto first = c.add_vacuum("v3");
    c.beam_splitter(first, kept, 1.0 - cfg.output_ratio);
    const circuit::ModeId targets[] = {first, kept};
    for (std::size_t k = 0; k < 2; ++k) {
      c.loss(targets[k], cfg.coupler_transmittance, "coupler" + std::to_string(k + 1));
      c.feedforward(targets[k], rx, rp, gains[k], k);
    }
    c.set_outputs({first, kept});
    return c;
  }

  c.loss(kept, cfg.coupler_transmittance, "coupler");
  c.feedforward(kept, rx, rp, gains[0], 0);
  if (stop == BuildStop::displaced_beam) {
    c.set_outputs({kept});
    return c;
  }
  // Balanced 1:M cascade: the k-th tap takes 1/(M-k) of what is left.
  const int m = static_cast<int>(cfg.n_clones());
  for (int k = 0; k + 1 < m; ++k) {
    const auto v = c.add_vacuum("v" + std::to_string(3 + k));
    c.beam_splitter(v, kept, 1.0 - 1.0 / static_cast<double>(m - k));
    clones.push_back(v);
  }
  clones.push_back(kept);
  c.set_outputs(clones);
  return c;
}

namespace detail {

// Signal coefficients (x_in → x_clone, p_in → p_clone) of every clone.
inline std::vector<Vec2> signal_transfer(const circuit::Circuit& c) {
  const auto t = transfer_matrix(c, coherent_state(0.0, 0.0));
  std::vector<Vec2> out;
  for (Eigen::Index k = 0; 2 * k < t.map.rows(); ++k) {
    out.emplace_back(t.coefficient(2 * k, "in.x"), t.coefficient(2 * k + 1, "in.p"));
  }
  return out;
}

inline std::vector<FeedforwardGain> calibrate_gains_at(const ClonerConfig& cfg, double tap) {
  const std::size_t s = cfg.n_stages();
  std::vector<FeedforwardGain> zero(s);
  // Stage k is calibrated against clone k; with one stage all clones are
  // identical copies of the same displaced beam.
  const auto base = signal_transfer(build_circuit(cfg, tap, zero));
  Mat ax(s, s), ap(s, s);
  for (std::size_t j = 0; j < s; ++j) {
    auto probe = zero;
    probe[j] = {1.0, 1.0};
    const auto with = signal_transfer(build_circuit(cfg, tap, probe));
    for (std::size_t k = 0; k < s; ++k) {
      ax(k, j) = with[k](0) - base[k](0);
      ap(k, j) = with[k](1) - base[k](1);
    }
  }
  Vec bx(s), bp(s);
  for (std::size_t k = 0; k < s; ++k) {
    bx(k) = 1.0 - base[k](0);
    bp(k) = 1.0 - base[k](1);
  }
  auto solve = [](const Mat& a, const Vec& b) {
    Eigen::FullPivLU<Mat> lu(a);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
      throw ConfigError("calibration: unity-gain condition is singular (no signal reaches the measurement)");
    }
    return Vec(lu.solve(b));
  };
  const Vec gx = solve(ax, bx);
  const Vec gp = solve(ap, bp);
  std::vector<FeedforwardGain> g(s);
  for (std::size_t k = 0; k < s; ++k) g[k] = {gx(k) * cfg.gain_scale, gp(k) * cfg.gain_scale};
  return g;
}

}  // namespace detail

/// Gains that make every clone's mean equal the input mean in the noiseless
/// analytic model (detector efficiency included, electronic noise ignored).
inline std::vector<FeedforwardGain> calibrate_gains(const ClonerConfig& cfg, double tap) {
  cfg.validate();
  return detail::calibrate_gains_at(cfg, tap);
}

/// Single-stage calibration. For the ideal 50/50 chain this is √2 per unit
/// photocurrent in both quadratures.
inline FeedforwardGain calibrate_unity_gain(const ClonerConfig& cfg) {
  if (cfg.n_stages() != 1) throw ConfigError("calibrate_unity_gain: circuit must have exactly one feed-forward stage");
  if (!cfg.tap_transmittance) throw ConfigError("calibrate_unity_gain: tap transmittance must be fixed");
  return calibrate_gains(cfg, *cfg.tap_transmittance)[0];
}

struct CloneResult {
  std::size_t id = 0;
  double gain_x = 0, gain_p = 0;
  Vec2 mean = Vec2::Zero();  // corrected for the verification station
  Mat2 cov = Mat2::Identity();
  StationVariances station{};
  double var_x = 0, var_p = 0;  // corrected
  double added_db_x = 0, added_db_p = 0;
  double fidelity = 0;
  double fidelity_err = 0;
  // Monte-Carlo standard errors (zero for analytic runs)
  Vec2 mean_err = Vec2::Zero();
  Vec2 var_err = Vec2::Zero();
};

struct CloneReport {
  std::vector<CloneResult> clones;
  double tap = 0;
  std::vector<FeedforwardGain> gains;
  std::vector<std::string> flags;
  double min_physical_eigenvalue = 0;
};

struct ClonerRun {
  CloneReport report;
  std::vector<GaussianState> clone_states;  // true clone states (analytic) or their estimates (Monte-Carlo)
};

struct MonteCarloOptions {
  std::uint64_t shots = 100000;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::size_t batches = 20;
};

struct ResolvedCircuit {
  circuit::Circuit circuit;
  double tap;
  std::vector<FeedforwardGain> gains;
};

inline double optimal_tap(const ClonerConfig& cfg);

inline ResolvedCircuit resolve(const ClonerConfig& cfg) {
  cfg.validate();
  const double tap = cfg.tap_transmittance ? *cfg.tap_transmittance : optimal_tap(cfg);
  std::vector<FeedforwardGain> gains = cfg.gains ? *cfg.gains : detail::calibrate_gains_at(cfg, tap);
  return {build_circuit(cfg, tap, gains), tap, gains};
}

/// Exact map from (input, v1, v2, v3, ... loss/electronic sources) to the
/// clone quadratures, feed-forward folded in.
inline QuadTransferMatrix transfer_matrix(const ClonerConfig& cfg) {
  return transfer_matrix(resolve(cfg).circuit, coherent_state(0.0, 0.0));
}

/// Same, stopped on the displaced kept arm before it is split.
inline QuadTransferMatrix displaced_transfer_matrix(const ClonerConfig& cfg) {
  const auto r = resolve(cfg);
  return transfer_matrix(build_circuit(cfg, r.tap, r.gains, BuildStop::displaced_beam), coherent_state(0.0, 0.0));
}

namespace detail {

// Sampled moments may sit marginally below shot noise, so estimates skip the
// physicality checks.
inline void finish_clone(CloneResult& c, double x, double p, bool estimated = false) {
  c.cov(0, 0) = c.var_x;
  c.cov(1, 1) = c.var_p;
  if (estimated) {
    c.added_db_x = 10.0 * std::log10(c.var_x);
    c.added_db_p = 10.0 * std::log10(c.var_p);
    c.fidelity = coherent_overlap(x, p, c.mean, c.cov).value;
  } else {
    c.added_db_x = added_noise_db(c.var_x);
    c.added_db_p = added_noise_db(c.var_p);
    c.fidelity = fidelity_coherent_vs_gaussian(x, p, GaussianState(c.mean, c.cov)).value;
  }
}

inline void flag_config(const ClonerConfig& cfg, CloneReport& report) {
  if (cfg.variant == Variant::asymmetric_1to2 && (cfg.output_ratio == 0.0 || cfg.output_ratio == 1.0)) {
    report.flags.push_back("degenerate output_ratio: one clone receives none of the kept arm");
  }
}

}  // namespace detail

inline ClonerRun run_cloner_analytic(const ClonerConfig& cfg, double x, double p) {
  const auto r = resolve(cfg);
  const GaussianState input = coherent_state(x, p);
  double worst = std::numeric_limits<double>::infinity();
  const GaussianState out =
      propagate_moments(r.circuit, input, [&](std::size_t, double e) { worst = std::min(worst, e); });
  if (worst < -kPhysicalityTol) {
    throw PhysicsError("analytic run produced an unphysical covariance (min eigenvalue " + std::to_string(worst) + ")");
  }
  const auto gains = detail::signal_transfer(r.circuit);

  ClonerRun run;
  run.report.tap = r.tap;
  run.report.gains = r.gains;
  run.report.min_physical_eigenvalue = worst;
  detail::flag_config(cfg, run.report);
  for (std::size_t k = 0; k < out.n_modes(); ++k) {
    GaussianState clone = partial_trace(out, {k});
    CloneResult c;
    c.id = k + 1;
    c.gain_x = gains[k](0);
    c.gain_p = gains[k](1);
    c.station = verification_station(clone, cfg.verify_detector(k));
    c.var_x = c.station.corrected_x;
    c.var_p = c.station.corrected_p;
    c.mean = clone.mode_mean(0);
    c.cov = clone.mode_cov(0);
    detail::finish_clone(c, x, p);
    run.report.clones.push_back(c);
    run.clone_states.push_back(std::move(clone));
  }
  return run;
}

namespace detail {

struct SampleMoments {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Zero();
  std::size_t n = 0;
};

// (x, p) samples as read by one station; rows = shots.
inline SampleMoments sample_moments(const std::vector<double>& xs, const std::vector<double>& ps, std::size_t begin,
                                    std::size_t end) {
  SampleMoments m;
  m.n = end - begin;
  for (std::size_t i = begin; i < end; ++i) m.mean += Vec2(xs[i], ps[i]);
  m.mean /= static_cast<double>(m.n);
  for (std::size_t i = begin; i < end; ++i) {
    const Vec2 d = Vec2(xs[i], ps[i]) - m.mean;
    m.cov += d * d.transpose();
  }
  m.cov /= static_cast<double>(m.n - 1);
  return m;
}

// Inverts a station's loss on sampled moments.
inline std::pair<Vec2, Mat2> correct_moments(const SampleMoments& raw, const DetectorModel& det) {
  const double eta = det.effective_efficiency();
  Mat2 cov = raw.cov / eta;
  cov(0, 0) = correct_variance(raw.cov(0, 0), det);
  cov(1, 1) = correct_variance(raw.cov(1, 1), det);
  return {raw.mean / std::sqrt(eta), cov};
}

}  // namespace detail

/// Shot-level run: outcomes sampled per shot, clones read out by the
/// verification stations (one (x, p) Wigner sample per clone per shot), and
/// moments estimated from the samples. Bit-identical for a given seed
/// regardless of `jobs`.
inline ClonerRun run_cloner_monte_carlo(const ClonerConfig& cfg, double x, double p, const MonteCarloOptions& opt) {
  if (opt.shots < 2 * std::max<std::size_t>(opt.batches, 1)) throw ConfigError("monte carlo: too few shots");
  const auto r = resolve(cfg);
  const GaussianState input = coherent_state(x, p);
  const std::size_t m = cfg.n_clones();
  const std::size_t n = opt.shots;
  std::vector<std::vector<double>> xs(m, std::vector<double>(n)), ps(m, std::vector<double>(n));
  double worst = std::numeric_limits<double>::infinity();

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t shot = begin; shot < end; ++shot) {
      Rng rng = stream_rng(opt.seed, shot);
      PhysicalityObserver obs;
      if (shot == 0) obs = [&](std::size_t, double e) { worst = std::min(worst, e); };
      const ShotResult res = run_shot(r.circuit, input, rng, obs);
      for (std::size_t k = 0; k < m; ++k) {
        const DetectorModel& det = cfg.verify_detector(k);
        const GaussianState seen = loss_channel(partial_trace(res.outputs, {k}), 0, det.effective_efficiency());
        const Eigen::LLT<Mat2> llt(seen.mode_cov(0));
        const Vec2 z(standard_normal(rng), standard_normal(rng));
        const Vec2 pt = seen.mode_mean(0) + llt.matrixL() * z;
        const double en = std::sqrt(det.electronic_noise);
        xs[k][shot] = pt(0) + en * standard_normal(rng);
        ps[k][shot] = pt(1) + en * standard_normal(rng);
      }
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        try {
          work(n * j / jobs, n * (j + 1) / jobs);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  if (worst < -kPhysicalityTol) {
    throw PhysicsError("monte carlo shot produced an unphysical covariance (min eigenvalue " + std::to_string(worst) +
                       ")");
  }

  ClonerRun run;
  run.report.tap = r.tap;
  run.report.gains = r.gains;
  run.report.min_physical_eigenvalue = worst;
  detail::flag_config(cfg, run.report);
  if (x == 0.0 || p == 0.0) run.report.flags.push_back("gain undefined: input has a zero quadrature");
  for (std::size_t k = 0; k < m; ++k) {
    const DetectorModel& det = cfg.verify_detector(k);
    const double eta = det.effective_efficiency();
    const auto raw = detail::sample_moments(xs[k], ps[k], 0, n);
    const auto [mean, cov] = detail::correct_moments(raw, det);
    CloneResult c;
    c.id = k + 1;
    c.mean = mean;
    c.cov = cov;
    c.station = {raw.cov(0, 0), raw.cov(1, 1), cov(0, 0), cov(1, 1)};
    c.var_x = cov(0, 0);
    c.var_p = cov(1, 1);
    c.gain_x = x != 0.0 ? mean(0) / x : std::numeric_limits<double>::quiet_NaN();
    c.gain_p = p != 0.0 ? mean(1) / p : std::numeric_limits<double>::quiet_NaN();
    const double dn = static_cast<double>(n);
    c.mean_err = Vec2(std::sqrt(raw.cov(0, 0) / dn / eta), std::sqrt(raw.cov(1, 1) / dn / eta));
    c.var_err = Vec2(raw.cov(0, 0), raw.cov(1, 1)) * std::sqrt(2.0 / (dn - 1.0)) / eta;
    detail::finish_clone(c, x, p, true);

    // Batch means for the fidelity's standard error.
    const std::size_t b = std::max<std::size_t>(opt.batches, 2);
    std::vector<double> fb;
    for (std::size_t i = 0; i < b; ++i) {
      const auto bm = detail::sample_moments(xs[k], ps[k], n * i / b, n * (i + 1) / b);
      const auto [bmean, bcov] = detail::correct_moments(bm, det);
      fb.push_back(detail::coherent_overlap(x, p, bmean, bcov).value);
    }
    double avg = 0, ss = 0;
    for (double f : fb) avg += f;
    avg /= static_cast<double>(b);
    for (double f : fb) ss += (f - avg) * (f - avg);
    c.fidelity_err = std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));

    run.report.clones.push_back(c);
    run.clone_states.emplace_back(c.mean, c.cov);
  }
  return run;
}

inline ClonerRun run_cloner(const ClonerConfig& cfg, double x, double p,
                            const std::optional<MonteCarloOptions>& mc = std::nullopt) {
  return mc ? run_cloner_monte_carlo(cfg, x, p, *mc) : run_cloner_analytic(cfg, x, p);
}

namespace detail {

inline double mean_added_noise(const CloneResult& c) { return 0.5 * (c.var_x + c.var_p) - 1.0; }

}  // namespace detail

/// Tap transmittance used when the config asks for "auto": for symmetric
/// variants the one maximizing clone fidelity, for the asymmetric cloner the
/// one minimizing the product of the two clones' added noise.
inline double optimal_tap(const ClonerConfig& cfg) {
  if (cfg.variant == Variant::classical) return 0.0;
  ClonerConfig probe = cfg;
  // t = 1 sends nothing to the measurement and cannot be calibrated.
  constexpr double hi = 1.0 - 1e-7;
  if (cfg.variant == Variant::asymmetric_1to2) {
    auto objective = [&](double t) {
      probe.tap_transmittance = t;
      const auto rep = run_cloner_analytic(probe, 0.0, 0.0).report;
      return detail::mean_added_noise(rep.clones[0]) * detail::mean_added_noise(rep.clones[1]);
    };
    return golden_section_minimize(objective, 0.0, hi, 1e-6).argmin;
  }
  auto objective = [&](double t) {
    probe.tap_transmittance = t;
    return run_cloner_analytic(probe, 0.0, 0.0).report.clones[0].fidelity;
  };
  return golden_section_maximize(objective, 0.0, hi, 1e-6).argmin;
}

/// Asymmetric 1→2 cloner with ratio r (tap fixed or optimized).
inline CloneReport asymmetric_1to2(double output_ratio, std::optional<double> tap,
                                   const DetectorModel& ff_detector = {}) {
  ClonerConfig cfg;
  cfg.variant = Variant::asymmetric_1to2;
  cfg.output_ratio = output_ratio;
  cfg.tap_transmittance = tap;
  cfg.ff_detector = ff_detector;
  return run_cloner_analytic(cfg, 0.0, 0.0).report;
}

/// Symmetric 1→M cloner (tap fixed or optimized).
inline CloneReport symmetric_1toM(int m, std::optional<double> tap, const DetectorModel& ff_detector = {}) {
  if (m < 2) throw ConfigError("symmetric_1toM: M must be >= 2");
  ClonerConfig cfg;
  cfg.variant = Variant::symmetric_1toM;
  cfg.clones = m;
  cfg.tap_transmittance = tap;
  cfg.ff_detector = ff_detector;
  return run_cloner_analytic(cfg, 0.0, 0.0).report;
}

}  // namespace clonesim
