#pragma once

// Truncated number-basis representation of single-mode Gaussian states.
// Used as an independent check of the phase-space formulas; nothing in the
// simulation path depends on it.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "clonesim/errors.hpp"
#include "clonesim/gaussian.hpp"

namespace clonesim::fock {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

inline constexpr double kTailTolerance = 1e-8;

inline CMat annihilation(int dim) {
  CMat a = CMat::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// D(β) = exp(β a† - β* a) on a `dim`-level space.
inline CMat displacement(Complex beta, int dim) {
  const CMat a = annihilation(dim);
  const CMat gen = beta * a.adjoint() - std::conj(beta) * a;
  return gen.exp();
}

/// S(ζ) = exp(½(ζ* a² - ζ a†²)) on a `dim`-level space.
inline CMat squeezing(Complex zeta, int dim) {
  const CMat a = annihilation(dim);
  const CMat a2 = a * a;
  const CMat gen = 0.5 * (std::conj(zeta) * a2 - zeta * a2.adjoint());
  return gen.exp();
}

/// Density matrix on levels 0..truncation. Throws if the state leaks more
/// than kTailTolerance of its trace above the truncation.
///
/// ρ = D(β) S(ζ) ρ_th S(ζ)† D(β)†, with ρ_th thermal of variance √det V and
/// ζ chosen so the anti-squeezed axis follows the major axis of V.
inline CMat density_matrix(const GaussianState& state, int truncation) {
  if (state.n_modes() != 1) throw ConfigError("fock: expects a single-mode state");
  if (truncation < 1) throw ConfigError("fock: truncation must be >= 1");
  if (!state.is_physical()) throw PhysicsError("fock: state is unphysical");
  const int keep = truncation + 1;
  const int dim = keep + std::max(60, keep);

  Eigen::SelfAdjointEigenSolver<Mat2> eig(state.mode_cov(0));
  const double lmin = eig.eigenvalues()(0);
  const double lmax = eig.eigenvalues()(1);
  const double nu = std::sqrt(std::max(lmin * lmax, 1.0));
  const double nth = (nu - 1.0) / 2.0;

  CMat rho = CMat::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) rho(n, n) = std::pow(nth, n) / std::pow(1.0 + nth, n + 1);

  const double r = 0.25 * std::log(lmax / lmin);
  if (r > 1e-12) {
    const Vec2 major = eig.eigenvectors().col(1);
    const double theta = std::atan2(major(1), major(0));
    const CMat s = squeezing(-r * std::polar(1.0, 2.0 * theta), dim);
    rho = s * rho * s.adjoint();
  }
  const Complex beta(state.mean()(0) / 2.0, state.mean()(1) / 2.0);
  if (std::abs(beta) > 0.0) {
    const CMat d = displacement(beta, dim);
    rho = d * rho * d.adjoint();
  }

  CMat out = rho.topLeftCorner(keep, keep);
  const double deficit = 1.0 - out.trace().real();
  if (deficit > kTailTolerance) {
    throw ConfigError("fock: truncation " + std::to_string(truncation) + " too small (trace deficit " +
                      std::to_string(deficit) + ")");
  }
  return out;
}

/// Number-basis amplitudes of the coherent state (x, p), levels 0..truncation.
inline CVec coherent_amplitudes(double x, double p, int truncation) {
  const Complex alpha(x / 2.0, p / 2.0);
  CVec c(truncation + 1);
  c(0) = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n <= truncation; ++n) c(n) = c(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return c;
}

/// ⟨α|ρ|α⟩ by direct summation in the truncated basis.
inline double fock_oracle_fidelity(double x, double p, const GaussianState& state, int truncation) {
  const CMat rho = density_matrix(state, truncation);
  const CVec c = coherent_amplitudes(x, p, truncation);
  return (c.adjoint() * rho * c)(0, 0).real();
}

/// As fock_oracle_fidelity, doubling the truncation until the state fits.
inline double fock_oracle_fidelity_adaptive(double x, double p, const GaussianState& state, int start = 20,
                                            int max_truncation = 320) {
  for (int t = start; t <= max_truncation; t *= 2) {
    try {
      return fock_oracle_fidelity(x, p, state, t);
    } catch (const ConfigError&) {
      if (2 * t > max_truncation) throw;
    }
  }
  throw ConfigError("fock: no admissible truncation");
}

}  // namespace clonesim::fock
