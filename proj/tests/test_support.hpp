#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "clonesim/gaussian.hpp"

namespace clonesim::test {

inline GaussianState squeeze(const GaussianState& s, std::size_t mode, double r) {
  Mat cov = s.cov();
  Vec mean = s.mean();
  const auto i = static_cast<Eigen::Index>(2 * mode);
  const double f[2] = {std::exp(-r), std::exp(r)};
  for (int a = 0; a < 2; ++a) {
    mean(i + a) *= f[a];
    cov.row(i + a) *= f[a];
    cov.col(i + a) *= f[a];
  }
  return GaussianState(mean, cov);
}

/// Random physical n-mode state: thermal, squeezed, mixed by beam splitters,
/// displaced. `scale` bounds the displacement.
inline GaussianState random_state(std::mt19937_64& rng, std::size_t n, double scale = 3.0, double max_r = 0.8,
                                  double max_thermal = 1.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec mean = Vec::Zero(2 * n);
  Mat cov = Mat::Zero(2 * n, 2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    const double nu = 1.0 + max_thermal * u(rng);
    cov(2 * k, 2 * k) = nu;
    cov(2 * k + 1, 2 * k + 1) = nu;
  }
  GaussianState s(mean, cov);
  for (std::size_t k = 0; k < n; ++k) {
    s = squeeze(s, k, max_r * (2.0 * u(rng) - 1.0));
    s = phase_shift(s, k, 2.0 * std::numbers::pi * u(rng));
  }
  for (std::size_t a = 0; a + 1 < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) s = beam_splitter(s, a, b, u(rng), 2.0 * std::numbers::pi * u(rng));
  }
  for (std::size_t k = 0; k < n; ++k) s = displace(s, k, scale * (2.0 * u(rng) - 1.0), scale * (2.0 * u(rng) - 1.0));
  return s;
}

inline double max_abs_diff(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace clonesim::test
