#pragma once

// Multimode Gaussian states and the Gaussian channels the cloning circuits
// are built from.
//
// Units: the vacuum has Δ²x = Δ²p = 1, x̂ = â + â†, p̂ = -i(â - â†), so a
// coherent state |α⟩ has mean (x, p) = (2 Re α, 2 Im α).
// Ordering: quadratures are interleaved (x₁, p₁, x₂, p₂, ...).
//
// Beam splitter convention (modes a, b, transmittance T, R = 1 - T):
//   b → e^{iφ} b  first, then
//   a' =  √T a + √R b
//   b' = -√R a + √T b
// The inverse of beam_splitter(a, b, T, φ) is beam_splitter(b, a, T, 0)
// followed by phase_shift(b, -φ).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "clonesim/errors.hpp"

namespace clonesim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kPhysicalityTol = 1e-9;

namespace detail {

inline Mat2 rotation(double phi) {
  Mat2 r;
  r << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
  return r;
}

// 4x4 action on (x_a, p_a, x_b, p_b).
inline Eigen::Matrix4d beam_splitter_matrix(double transmittance, double phi) {
  const double t = std::sqrt(transmittance);
  const double r = std::sqrt(1.0 - transmittance);
  Eigen::Matrix4d mix = Eigen::Matrix4d::Zero();
  mix.block<2, 2>(0, 0) = t * Mat2::Identity();
  mix.block<2, 2>(0, 2) = r * Mat2::Identity();
  mix.block<2, 2>(2, 0) = -r * Mat2::Identity();
  mix.block<2, 2>(2, 2) = t * Mat2::Identity();
  Eigen::Matrix4d phase = Eigen::Matrix4d::Identity();
  phase.block<2, 2>(2, 2) = rotation(phi);
  return mix * phase;
}

// Applies x → S x on the listed coordinates of (mean, cov); all other
// coordinates untouched.
template <typename Derived>
void apply_local(Vec& mean, Mat& cov, const std::vector<Eigen::Index>& idx,
                 const Eigen::MatrixBase<Derived>& s) {
  const Vec sub = mean(idx);
  mean(idx) = s * sub;
  const Mat rows = cov(idx, Eigen::all);
  cov(idx, Eigen::all) = s * rows;
  const Mat cols = cov(Eigen::all, idx);
  cov(Eigen::all, idx) = cols * s.transpose();
}

// Pure loss on the two quadratures starting at `first`.
inline void apply_loss(Vec& mean, Mat& cov, Eigen::Index first, double eta) {
  const double s = std::sqrt(eta);
  mean.segment(first, 2) *= s;
  cov.middleRows(first, 2) *= s;
  cov.middleCols(first, 2) *= s;
  cov.block(first, first, 2, 2) += (1.0 - eta) * Mat2::Identity();
}

inline std::vector<Eigen::Index> keep_indices(Eigen::Index size,
                                              std::span<const Eigen::Index> drop) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < size; ++i) {
    if (std::find(drop.begin(), drop.end(), i) == drop.end()) keep.push_back(i);
  }
  return keep;
}

// Symplectic form over `n_modes` quantum modes followed by `n_classical`
// classical coordinates (which carry no commutator).
inline Mat symplectic_form(Eigen::Index n_modes, Eigen::Index n_classical = 0) {
  Mat j = Mat::Zero(2 * n_modes + n_classical, 2 * n_modes + n_classical);
  for (Eigen::Index m = 0; m < n_modes; ++m) {
    j(2 * m, 2 * m + 1) = 1.0;
    j(2 * m + 1, 2 * m) = -1.0;
  }
  return j;
}

}  // namespace detail

/// Smallest eigenvalue of the Hermitian matrix cov + iJ. Non-negative (up to
/// rounding) iff the covariance obeys the uncertainty principle, which in
/// vacuum-variance-1 units reads Δx·Δp ≥ 1.
/// Trailing `n_classical` coordinates are treated as classical registers.
inline double min_physical_eigenvalue(const Mat& cov, Eigen::Index n_classical = 0) {
  const Eigen::Index n_modes = (cov.rows() - n_classical) / 2;
  if (cov.rows() == 0) return 0.0;
  const Eigen::MatrixXcd h =
      cov.cast<std::complex<double>>() +
      std::complex<double>(0.0, 1.0) *
          detail::symplectic_form(n_modes, n_classical).cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

class GaussianState {
 public:
  GaussianState() = default;

  GaussianState(Vec mean, Mat cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (mean_.size() % 2 != 0 || cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
      throw ConfigError("GaussianState: mean must have even length 2N and cov must be 2N x 2N");
    }
    if (cov_.size() > 0 && (cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * std::max(1.0, cov_.cwiseAbs().maxCoeff())) {
      throw PhysicsError("GaussianState: covariance is not symmetric");
    }
  }

  static GaussianState vacuum(std::size_t n_modes) {
    const auto dim = static_cast<Eigen::Index>(2 * n_modes);
    return GaussianState(Vec::Zero(dim), Mat::Identity(dim, dim));
  }

  const Vec& mean() const { return mean_; }
  const Mat& cov() const { return cov_; }
  std::size_t n_modes() const { return static_cast<std::size_t>(mean_.size() / 2); }

  Vec2 mode_mean(std::size_t mode) const {
    check_mode(mode);
    return mean_.segment<2>(2 * static_cast<Eigen::Index>(mode));
  }
  Mat2 mode_cov(std::size_t mode) const {
    check_mode(mode);
    const auto i = 2 * static_cast<Eigen::Index>(mode);
    return cov_.block<2, 2>(i, i);
  }

  double min_physical_eigenvalue() const { return clonesim::min_physical_eigenvalue(cov_); }
  bool is_physical(double tol = kPhysicalityTol) const {
    return n_modes() == 0 || min_physical_eigenvalue() >= -tol;
  }

  void check_mode(std::size_t mode) const {
    if (mode >= n_modes()) {
      throw std::out_of_range("mode index " + std::to_string(mode) + " out of range for " +
                              std::to_string(n_modes()) + "-mode state");
    }
  }

 private:
  Vec mean_;
  Mat cov_;
};

/// Single-mode coherent state with quadrature means (x, p); α = (x + ip)/2.
inline GaussianState coherent_state(double x, double p) {
  return GaussianState(Vec2(x, p), Mat::Identity(2, 2));
}

inline double mean_photon_number(const GaussianState& s) {
  return (s.cov().trace() - 2.0 * static_cast<double>(s.n_modes()) + s.mean().squaredNorm()) / 4.0;
}

/// Product state a ⊗ b.
inline GaussianState tensor(const GaussianState& a, const GaussianState& b) {
  const Eigen::Index na = a.mean().size();
  const Eigen::Index nb = b.mean().size();
  Vec mean(na + nb);
  mean << a.mean(), b.mean();
  Mat cov = Mat::Zero(na + nb, na + nb);
  cov.topLeftCorner(na, na) = a.cov();
  cov.bottomRightCorner(nb, nb) = b.cov();
  return GaussianState(std::move(mean), std::move(cov));
}

inline GaussianState tensor_vacuum(const GaussianState& state, std::size_t k) {
  if (k < 1) throw ConfigError("tensor_vacuum: k must be >= 1");
  return tensor(state, GaussianState::vacuum(k));
}

inline GaussianState beam_splitter(const GaussianState& state, std::size_t mode_a, std::size_t mode_b,
                                   double transmittance, double phi = 0.0) {
  state.check_mode(mode_a);
  state.check_mode(mode_b);
  if (mode_a == mode_b) throw ConfigError("beam_splitter: modes must differ");
  if (!(transmittance >= 0.0 && transmittance <= 1.0)) {
    throw ConfigError("beam_splitter: transmittance must lie in [0, 1]");
  }
  const auto a = static_cast<Eigen::Index>(2 * mode_a);
  const auto b = static_cast<Eigen::Index>(2 * mode_b);
  Vec mean = state.mean();
  Mat cov = state.cov();
  detail::apply_local(mean, cov, {a, a + 1, b, b + 1},
                      detail::beam_splitter_matrix(transmittance, phi));
  return GaussianState(std::move(mean), std::move(cov));
}

/// â → e^{iφ} â on one mode (rotation of its phase space by φ).
inline GaussianState phase_shift(const GaussianState& state, std::size_t mode, double phi) {
  state.check_mode(mode);
  const auto i = static_cast<Eigen::Index>(2 * mode);
  Vec mean = state.mean();
  Mat cov = state.cov();
  detail::apply_local(mean, cov, {i, i + 1}, detail::rotation(phi));
  return GaussianState(std::move(mean), std::move(cov));
}

inline GaussianState displace(const GaussianState& state, std::size_t mode, double dx, double dp) {
  state.check_mode(mode);
  Vec mean = state.mean();
  mean.segment<2>(2 * static_cast<Eigen::Index>(mode)) += Vec2(dx, dp);
  return GaussianState(std::move(mean), state.cov());
}

/// Beam splitter with a vacuum ancilla at transmittance η, ancilla traced out.
inline GaussianState loss_channel(const GaussianState& state, std::size_t mode, double efficiency) {
  state.check_mode(mode);
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw ConfigError("loss_channel: efficiency must lie in (0, 1]");
  }
  Vec mean = state.mean();
  Mat cov = state.cov();
  detail::apply_loss(mean, cov, static_cast<Eigen::Index>(2 * mode), efficiency);
  return GaussianState(std::move(mean), std::move(cov));
}

/// Marginal on `keep` (sorted, duplicates removed).
inline GaussianState partial_trace(const GaussianState& state, std::vector<std::size_t> keep) {
  if (keep.empty()) throw ConfigError("partial_trace: keep set is empty");
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  std::vector<Eigen::Index> idx;
  for (auto m : keep) {
    state.check_mode(m);
    idx.push_back(static_cast<Eigen::Index>(2 * m));
    idx.push_back(static_cast<Eigen::Index>(2 * m + 1));
  }
  return GaussianState(state.mean()(idx), state.cov()(idx, idx));
}

}  // namespace clonesim
