#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "clonesim/errors.hpp"
#include "clonesim/gaussian.hpp"
#include "clonesim/optimize.hpp"

namespace clonesim {

/// ⟨α|ρ|α⟩ split into the part set by the clone covariance alone and the
/// penalty from a mean offset.
struct FidelityResult {
  double value;
  double variance_factor;
  double displacement_factor;
};

/// Overlap of coherent state (x, p) with a single-mode Gaussian state:
///   F = 2/√det(I+V) · exp(-½ δᵀ (I+V)⁻¹ δ),   δ = mean - (x, p).
/// With δ = 0 and diagonal V this is 2/√((1+Δ²x)(1+Δ²p)).
namespace detail {

// The formula alone, for moments that are estimates rather than states.
inline FidelityResult coherent_overlap(double x, double p, const Vec2& mean, const Mat2& cov) {
  const Mat2 s = Mat2::Identity() + cov;
  const Vec2 delta = mean - Vec2(x, p);
  const double vf = 2.0 / std::sqrt(s.determinant());
  const double df = std::exp(-0.5 * delta.dot(s.ldlt().solve(delta)));
  return {vf * df, vf, df};
}

}  // namespace detail

inline FidelityResult fidelity_coherent_vs_gaussian(double x, double p, const GaussianState& state) {
  if (state.n_modes() != 1) throw ConfigError("fidelity: expects a single-mode state");
  if (!state.is_physical()) throw PhysicsError("fidelity: state is unphysical");
  return detail::coherent_overlap(x, p, state.mode_mean(0), state.mode_cov(0));
}

inline FidelityResult fidelity_coherent_vs_gaussian(const GaussianState& target, const GaussianState& state) {
  if (target.n_modes() != 1 || !target.mode_cov(0).isIdentity(1e-12)) {
    throw ConfigError("fidelity: target must be a single-mode coherent state");
  }
  return fidelity_coherent_vs_gaussian(target.mean()(0), target.mean()(1), state);
}

/// Clone variance relative to the shot-noise level, in dB.
inline double added_noise_db(double clone_variance) {
  if (!(clone_variance >= 1.0 - 1e-12)) {
    throw PhysicsError("added_noise_db: variance " + std::to_string(clone_variance) +
                       " is below the shot-noise level");
  }
  return 10.0 * std::log10(clone_variance);
}

/// Componentwise clone/input mean ratio.
inline std::pair<double, double> estimate_gain(const Vec2& input_mean, const Vec2& clone_mean) {
  if (input_mean(0) == 0.0 || input_mean(1) == 0.0) {
    throw ConfigError("estimate_gain: input has no signal in one quadrature");
  }
  return {clone_mean(0) / input_mean(0), clone_mean(1) / input_mean(1)};
}

/// Isotropic zero-mean Gaussian prior over coherent inputs with mean photon
/// number `nbar`; each quadrature mean has variance variance_per_photon·nbar.
struct EnsembleSpec {
  double nbar = 0.0;
  double variance_per_photon = 2.0;

  double quadrature_variance() const { return variance_per_photon * nbar; }
  std::string convention() const {
    return "isotropic zero-mean Gaussian prior, sigma^2 = " + std::to_string(variance_per_photon) +
           " * nbar per quadrature";
  }
  void validate() const {
    if (!(nbar >= 0.0)) throw ConfigError("ensemble: nbar must be >= 0");
    if (!(variance_per_photon > 0.0)) throw ConfigError("ensemble: variance_per_photon must be > 0");
  }
  bool operator==(const EnsembleSpec&) const = default;
};

/// Clone described by its per-quadrature gain and variance.
struct CloneModel {
  double gain_x = 1.0, gain_p = 1.0;
  double var_x = 1.0, var_p = 1.0;
};

/// Single-shot fidelity averaged over the prior, in closed form: each
/// quadrature contributes 1/√(1 + σ²(1-g)²/(1+V)).
inline double average_fidelity_over_ensemble(const CloneModel& clone, const EnsembleSpec& ensemble) {
  ensemble.validate();
  if (clone.var_x < 1.0 - 1e-12 || clone.var_p < 1.0 - 1e-12) {
    throw PhysicsError("average_fidelity: clone variances must be >= 1");
  }
  const double s2 = ensemble.quadrature_variance();
  auto factor = [&](double g, double v) { return 1.0 / std::sqrt(1.0 + s2 * (1.0 - g) * (1.0 - g) / (1.0 + v)); };
  return 2.0 / std::sqrt((1.0 + clone.var_x) * (1.0 + clone.var_p)) * factor(clone.gain_x, clone.var_x) *
         factor(clone.gain_p, clone.var_p);
}

struct ClassicalBound {
  double fidelity;
  double gain;
};

/// Best measure-and-prepare cloner for the prior: dual homodyne then
/// coherent states prepared at g times the estimate (clone variance 1+2g²),
/// with g optimized.
inline ClassicalBound classical_ensemble_bound(const EnsembleSpec& ensemble) {
  auto f = [&](double g) {
    const double v = 1.0 + 2.0 * g * g;
    return average_fidelity_over_ensemble({g, g, v, v}, ensemble);
  };
  const auto best = golden_section_maximize(f, 0.0, 1.0, 1e-9);
  return {best.value, best.argmin};
}

struct WignerEllipse {
  Vec2 center;
  double semi_major;
  double semi_minor;
  double angle;  // of the major axis from the x axis, radians in (-π/2, π/2]
};

/// 1σ noise contour of a single-mode state's Wigner function.
inline WignerEllipse wigner_contour(const GaussianState& state) {
  if (state.n_modes() != 1) throw ConfigError("wigner_contour: expects a single-mode state");
  Eigen::SelfAdjointEigenSolver<Mat2> eig(state.mode_cov(0));
  const Vec2 major = eig.eigenvectors().col(1);
  double angle = std::atan2(major(1), major(0));
  if (angle <= -std::numbers::pi / 2) angle += std::numbers::pi;
  if (angle > std::numbers::pi / 2) angle -= std::numbers::pi;
  return {state.mode_mean(0), std::sqrt(eig.eigenvalues()(1)), std::sqrt(eig.eigenvalues()(0)), angle};
}

}  // namespace clonesim
