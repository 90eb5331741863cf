#pragma once

// Homodyne / dual-homodyne detection with conditional Gaussian updates,
// detector imperfections, feed-forward displacement and the verification
// stations used to read out the clones.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "clonesim/errors.hpp"
#include "clonesim/gaussian.hpp"
#include "clonesim/rng.hpp"

namespace clonesim {

/// One detection chain. electronic_noise is a variance in shot-noise units
/// that is added to the photocurrent, never to the optical field.
struct DetectorModel {
  double quantum_efficiency = 1.0;
  double visibility = 1.0;
  double electronic_noise = 0.0;

  static DetectorModel ideal() { return {}; }

  /// Electronic noise given as dB relative to the shot-noise level.
  static double noise_from_db(double db) { return std::pow(10.0, db / 10.0); }

  double effective_efficiency() const { return visibility * visibility * quantum_efficiency; }
  bool is_ideal() const { return effective_efficiency() == 1.0 && electronic_noise == 0.0; }

  void validate() const {
    if (!(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0)) {
      throw ConfigError("detector: quantum_efficiency must lie in (0, 1]");
    }
    if (!(visibility > 0.0 && visibility <= 1.0)) {
      throw ConfigError("detector: visibility must lie in (0, 1]");
    }
    if (!(electronic_noise >= 0.0) || !std::isfinite(electronic_noise)) {
      throw ConfigError("detector: electronic_noise must be >= 0");
    }
  }

  bool operator==(const DetectorModel&) const = default;
};

/// Raw photocurrents (shot-noise units, after detector loss and electronic
/// noise) plus the factor that turns each into an unbiased estimate of the
/// quadrature it measures.
struct MeasurementOutcome {
  std::vector<double> raw;
  std::vector<std::string> labels;
  std::vector<double> scale;

  std::vector<double> estimates() const {
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] * scale[i];
    return out;
  }
};

/// Displacement applied per unit of raw photocurrent (the electronic gain).
struct FeedforwardGain {
  double x = 0.0;
  double p = 0.0;
  bool operator==(const FeedforwardGain&) const = default;
};

namespace detail {

inline Vec2 quadrature_direction(double theta) { return {std::cos(theta), std::sin(theta)}; }

struct HomodyneMoments {
  double mean;      // of the photocurrent
  double variance;  // including electronic noise
};

// Loss of the detector already applied to `state`.
inline HomodyneMoments homodyne_moments(const GaussianState& state, std::size_t mode, double theta,
                                        const DetectorModel& det) {
  const Vec2 u = quadrature_direction(theta);
  return {u.dot(state.mode_mean(mode)), u.dot(state.mode_cov(mode) * u) + det.electronic_noise};
}

// Conditions the remaining modes on photocurrent `outcome` and drops `mode`.
inline GaussianState condition_on(const GaussianState& lossy, std::size_t mode, double theta,
                                  const HomodyneMoments& m, double outcome) {
  const auto first = static_cast<Eigen::Index>(2 * mode);
  const std::vector<Eigen::Index> drop{first, first + 1};
  const auto rest = keep_indices(lossy.mean().size(), drop);
  Vec mean = lossy.mean()(rest);
  Mat cov = lossy.cov()(rest, rest);
  if (!rest.empty()) {
    const Vec cross = lossy.cov()(rest, drop) * quadrature_direction(theta);
    // Pseudoinverse of the rank-1 measured block: a zero-variance readout
    // carries no information that could shift the rest.
    const double inv = m.variance > 1e-300 ? 1.0 / m.variance : 0.0;
    mean += cross * ((outcome - m.mean) * inv);
    cov -= cross * cross.transpose() * inv;
    cov = 0.5 * (cov + cov.transpose()).eval();
  }
  return GaussianState(std::move(mean), std::move(cov));
}

}  // namespace detail

/// Homodyne of quadrature cosθ·x + sinθ·p on `mode` with a known outcome.
/// Returns the conditional state of the remaining modes.
inline GaussianState homodyne_conditional(const GaussianState& state, std::size_t mode, double theta,
                                          const DetectorModel& det, double outcome) {
  det.validate();
  const GaussianState lossy = loss_channel(state, mode, det.effective_efficiency());
  return detail::condition_on(lossy, mode, theta, detail::homodyne_moments(lossy, mode, theta, det),
                              outcome);
}

inline std::pair<GaussianState, MeasurementOutcome> homodyne(const GaussianState& state, std::size_t mode,
                                                             double theta, const DetectorModel& det,
                                                             Rng& rng) {
  det.validate();
  const double eta = det.effective_efficiency();
  const GaussianState lossy = loss_channel(state, mode, eta);
  const auto m = detail::homodyne_moments(lossy, mode, theta, det);
  const double outcome = m.mean + std::sqrt(m.variance) * standard_normal(rng);
  MeasurementOutcome out{{outcome}, {"q"}, {1.0 / std::sqrt(eta)}};
  return {detail::condition_on(lossy, mode, theta, m, outcome), std::move(out)};
}

/// Simultaneous x/p measurement: mix `mode` with a vacuum ancilla on a 50/50
/// splitter, homodyne x on one port and p on the other. The returned state
/// no longer contains `mode`.
inline std::pair<GaussianState, MeasurementOutcome> dual_homodyne(const GaussianState& state, std::size_t mode,
                                                                  const DetectorModel& det, Rng& rng) {
  state.check_mode(mode);
  const std::size_t ancilla = state.n_modes();
  GaussianState s = beam_splitter(tensor_vacuum(state, 1), ancilla, mode, 0.5);
  auto [after_x, ox] = homodyne(s, mode, 0.0, det, rng);
  auto [after_p, op] = homodyne(after_x, ancilla - 1, std::numbers::pi / 2, det, rng);
  const double scale = std::sqrt(2.0 / det.effective_efficiency());
  MeasurementOutcome out{{ox.raw[0], op.raw[0]}, {"x", "p"}, {scale, scale}};
  return {std::move(after_p), std::move(out)};
}

/// Displaces `target` by (g_x·raw_x, g_p·raw_p) of a dual-homodyne outcome.
inline GaussianState feedforward_displace(const GaussianState& state, std::size_t target,
                                          const MeasurementOutcome& outcome, const FeedforwardGain& gain) {
  if (outcome.raw.size() != 2) throw ConfigError("feedforward_displace: expected an (x, p) outcome");
  return displace(state, target, gain.x * outcome.raw[0], gain.p * outcome.raw[1]);
}

struct StationVariances {
  double raw_x, raw_p;
  double corrected_x, corrected_p;
};

inline constexpr double kCorrectedVarianceFloor = 1e-6;

/// Inverts the station's loss and electronic noise on a measured variance.
inline double correct_variance(double measured, const DetectorModel& det) {
  const double eta = det.effective_efficiency();
  const double v = (measured - (1.0 - eta) - det.electronic_noise) / eta;
  if (v < kCorrectedVarianceFloor) {
    throw PhysicsError("verification: corrected variance " + std::to_string(v) +
                       " below floor; station calibration is inconsistent");
  }
  return v;
}

/// Variances a homodyne station reads on a single-mode clone, raw and
/// corrected for its efficiency and electronic noise.
inline StationVariances verification_station(const GaussianState& clone, const DetectorModel& det) {
  if (clone.n_modes() != 1) throw ConfigError("verification_station: expects a single-mode state");
  det.validate();
  const GaussianState seen = loss_channel(clone, 0, det.effective_efficiency());
  const double rx = seen.cov()(0, 0) + det.electronic_noise;
  const double rp = seen.cov()(1, 1) + det.electronic_noise;
  return {rx, rp, correct_variance(rx, det), correct_variance(rp, det)};
}

}  // namespace clonesim
