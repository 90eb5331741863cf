#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "clonesim/cloner.hpp"
#include "clonesim/fock.hpp"
#include "clonesim/metrics.hpp"
#include "test_support.hpp"

using namespace clonesim;
using clonesim::test::random_state;
using clonesim::test::squeeze;

namespace {

GaussianState diag_state(double mx, double mp, double vx, double vp) {
  Mat c = Mat::Zero(2, 2);
  c(0, 0) = vx;
  c(1, 1) = vp;
  return GaussianState(Vec2(mx, mp), c);
}

double db_to_var(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace

TEST(Fidelity, Examples) {
  EXPECT_NEAR(fidelity_coherent_vs_gaussian(0.0, 0.0, diag_state(0, 0, 2, 2)).value, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(fidelity_coherent_vs_gaussian(coherent_state(1.5, -2.0), coherent_state(1.5, -2.0)).value, 1.0, 1e-15);
  const auto off = fidelity_coherent_vs_gaussian(0.0, 0.0, coherent_state(2.0, 0.0));
  EXPECT_NEAR(off.value, std::exp(-1.0), 1e-15);
  EXPECT_NEAR(fock::fock_oracle_fidelity(0.0, 0.0, coherent_state(2.0, 0.0), 40), std::exp(-1.0), 1e-8);
}

TEST(Fidelity, ComponentsMultiply) {
  std::mt19937_64 gen(1);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_state(gen, 1);
    const auto f = fidelity_coherent_vs_gaussian(0.3, -0.2, s);
    EXPECT_NEAR(f.value, f.variance_factor * f.displacement_factor, 1e-15);
    EXPECT_LE(f.value, f.variance_factor);
    EXPECT_GT(f.value, 0.0);
    EXPECT_LE(f.value, 1.0 + 1e-12);
  }
}

TEST(Fidelity, Errors) {
  EXPECT_THROW(fidelity_coherent_vs_gaussian(0.0, 0.0, diag_state(0, 0, 0.5, 0.5)), PhysicsError);
  EXPECT_THROW(fidelity_coherent_vs_gaussian(0.0, 0.0, GaussianState::vacuum(2)), ConfigError);
  EXPECT_THROW(fidelity_coherent_vs_gaussian(diag_state(0, 0, 2, 2), coherent_state(0, 0)), ConfigError);
}

TEST(Fidelity, DisplacementCovariant) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_state(gen, 1);
    const double x = u(gen), p = u(gen), dx = u(gen), dp = u(gen);
    EXPECT_NEAR(fidelity_coherent_vs_gaussian(x, p, s).value,
                fidelity_coherent_vs_gaussian(x + dx, p + dp, displace(s, 0, dx, dp)).value, 1e-13);
  }
}

TEST(Fidelity, MonotoneInVarianceAndOffset) {
  double prev = 2.0;
  for (double v = 1.0; v <= 6.0; v += 0.25) {
    const double f = fidelity_coherent_vs_gaussian(0.0, 0.0, diag_state(0.5, 0.0, v, 2.0)).value;
    EXPECT_LE(f, prev);
    prev = f;
  }
  prev = 2.0;
  for (double d = 0.0; d <= 6.0; d += 0.25) {
    const double f = fidelity_coherent_vs_gaussian(0.0, 0.0, diag_state(d * 0.6, d * 0.8, 2.0, 3.0)).value;
    EXPECT_LE(f, prev);
    prev = f;
  }
}

TEST(Fidelity, UnityGainSpecialCase) {
  for (double vx : {1.0, 1.5, 2.0, 3.7}) {
    for (double vp : {1.0, 2.0, 5.0}) {
      const double f = fidelity_coherent_vs_gaussian(1.0, 2.0, diag_state(1.0, 2.0, vx, vp)).value;
      EXPECT_NEAR(f * std::sqrt((1.0 + vx) * (1.0 + vp)), 2.0, 1e-14);
    }
  }
}

TEST(FockOracle, SimpleCases) {
  EXPECT_NEAR(fock::fock_oracle_fidelity(0.0, 0.0, GaussianState::vacuum(1), 20), 1.0, 1e-12);
  EXPECT_NEAR(fock::fock_oracle_fidelity_adaptive(0.0, 0.0, diag_state(0, 0, 3, 3)), 0.5, 1e-8);
  EXPECT_NEAR(fock::fock_oracle_fidelity_adaptive(1.0, 1.0, diag_state(1, 1, 2, 2)), 2.0 / 3.0, 1e-8);
}

TEST(FockOracle, AgreesWithClosedFormOnRandomStates) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int cases = 0;
  while (cases < 200) {
    const auto s = random_state(gen, 1, 3.0, 0.6, 1.0);
    if (mean_photon_number(s) > 5.0) continue;
    ++cases;
    const double x = s.mean()(0) + 1.5 * u(gen), p = s.mean()(1) + 1.5 * u(gen);
    EXPECT_NEAR(fock::fock_oracle_fidelity_adaptive(x, p, s, 40), fidelity_coherent_vs_gaussian(x, p, s).value, 1e-6)
        << "case " << cases;
  }
}

TEST(AddedNoise, Examples) {
  EXPECT_NEAR(added_noise_db(1.0), 0.0, 1e-15);
  EXPECT_NEAR(added_noise_db(2.0), 3.0103, 1e-4);
  EXPECT_NEAR(added_noise_db(std::pow(10.0, 0.328)), 3.28, 1e-12);
  EXPECT_NEAR(std::pow(10.0, 0.328), 2.128, 1e-3);
  EXPECT_THROW(added_noise_db(0.9), PhysicsError);
}

TEST(EstimateGain, Examples) {
  const auto [gx, gp] = estimate_gain(Vec2(3.0, -2.0), Vec2(3.0, -2.0));
  EXPECT_EQ(gx, 1.0);
  EXPECT_EQ(gp, 1.0);
  const auto [hx, hp] = estimate_gain(Vec2(10.0, 10.0), Vec2(9.6, 10.0));
  EXPECT_NEAR(hx, 0.96, 1e-15);
  EXPECT_NEAR(hp, 1.00, 1e-15);
  EXPECT_THROW(estimate_gain(Vec2(0.0, 1.0), Vec2(0.0, 1.0)), ConfigError);
}

TEST(EstimateGain, MonteCarloSpreadShrinksAsRootShots) {
  ClonerConfig cfg;
  cfg.variant = Variant::classical;
  auto spread = [&](std::uint64_t shots) {
    std::vector<double> g;
    for (std::uint64_t seed = 1; seed <= 24; ++seed) {
      g.push_back(run_cloner_monte_carlo(cfg, 5.0, 5.0, {shots, seed, 1, 20}).report.clones[0].gain_x);
    }
    double m = 0, v = 0;
    for (double x : g) m += x;
    m /= double(g.size());
    for (double x : g) v += (x - m) * (x - m);
    return std::sqrt(v / double(g.size() - 1));
  };
  const double s1 = spread(1000), s2 = spread(10000);
  // Standard error of the gain: √(3/shots)/5.
  EXPECT_NEAR(s1, std::sqrt(3.0 / 1000) / 5.0, 0.5 * std::sqrt(3.0 / 1000) / 5.0);
  EXPECT_GT(s1 / s2, std::sqrt(10.0) / 2.0);
  EXPECT_LT(s1 / s2, std::sqrt(10.0) * 2.0);
}

TEST(Ensemble, UnityGainIgnoresPrior) {
  const CloneModel c{1.0, 1.0, 2.0, 2.5};
  const double single = fidelity_coherent_vs_gaussian(3.0, 1.0, diag_state(3.0, 1.0, 2.0, 2.5)).value;
  for (double nbar : {0.0, 1.0, 50.0, 1e4}) EXPECT_NEAR(average_fidelity_over_ensemble(c, {nbar}), single, 1e-15);
}

TEST(Ensemble, ClosedFormMatchesGridIntegration) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const CloneModel c{0.8 + 0.4 * u(gen), 0.8 + 0.4 * u(gen), 1.0 + 2.0 * u(gen), 1.0 + 2.0 * u(gen)};
    const EnsembleSpec e{60.0 * u(gen)};
    const double sigma = std::sqrt(e.quadrature_variance());
    // Trapezoid rule over ±10σ of the prior; spectrally accurate for
    // Gaussian integrands.
    constexpr int n = 400;
    const double lo = -10.0 * sigma, h = 20.0 * sigma / n;
    const double norm = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    double sum = 0.0;
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; b <= n; ++b) {
        const double x = lo + a * h, p = lo + b * h;
        const double w = (a == 0 || a == n ? 0.5 : 1.0) * (b == 0 || b == n ? 0.5 : 1.0);
        const double prior = norm * std::exp(-(x * x + p * p) / (2.0 * sigma * sigma));
        const auto clone = diag_state(c.gain_x * x, c.gain_p * p, c.var_x, c.var_p);
        sum += w * prior * fidelity_coherent_vs_gaussian(x, p, clone).value;
      }
    }
    EXPECT_NEAR(average_fidelity_over_ensemble(c, e), sum * h * h, 1e-6) << "case " << i;
  }
}

TEST(Ensemble, MeasuredGainsAtFiftyPhotons) {
  const EnsembleSpec e{50.0};
  const double f1 = average_fidelity_over_ensemble({0.96, 1.00, db_to_var(3.28), db_to_var(3.20)}, e);
  const double f2 = average_fidelity_over_ensemble({1.03, 1.03, db_to_var(3.16), db_to_var(3.15)}, e);
  EXPECT_NEAR(f1, 0.627, 0.015);
  EXPECT_NEAR(f2, 0.633, 0.015);
  EXPECT_NE(e.convention().find("2.0"), std::string::npos);
}

TEST(Ensemble, ClassicalBoundary) {
  const auto b = classical_ensemble_bound({50.0});
  EXPECT_NEAR(b.fidelity, 0.502, 0.005);
  EXPECT_NEAR(b.fidelity, 51.0 / 101.0, 1e-9);
  EXPECT_GT(b.gain, 0.9);
  EXPECT_LT(b.gain, 1.0);
  // Unity gain measure-and-prepare is the nbar → 0 limit.
  EXPECT_NEAR(classical_ensemble_bound({0.0}).fidelity, 1.0, 1e-6);
  EXPECT_THROW(classical_ensemble_bound({-1.0}), ConfigError);
}

TEST(Ensemble, RejectsSubShotNoiseClones) {
  EXPECT_THROW(average_fidelity_over_ensemble({1.0, 1.0, 0.5, 2.0}, {10.0}), PhysicsError);
}

TEST(Wigner, Contours) {
  const auto vac = wigner_contour(GaussianState::vacuum(1));
  EXPECT_NEAR(vac.semi_major, 1.0, 1e-15);
  EXPECT_NEAR(vac.semi_minor, 1.0, 1e-15);
  EXPECT_EQ(vac.center, Vec2::Zero());

  ClonerConfig cfg;
  const auto clone = run_cloner_analytic(cfg, 2.0, 0.0).clone_states[0];
  const auto e = wigner_contour(clone);
  EXPECT_NEAR(e.center(0), 2.0, 1e-12);
  EXPECT_NEAR(e.center(1), 0.0, 1e-12);
  EXPECT_NEAR(e.semi_major, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(e.semi_minor, std::sqrt(2.0), 1e-12);

  cfg.variant = Variant::classical;
  const auto c = wigner_contour(run_cloner_analytic(cfg, 2.0, 0.0).clone_states[0]);
  EXPECT_NEAR(c.semi_major, std::sqrt(3.0), 1e-12);

  const auto sq = wigner_contour(phase_shift(squeeze(GaussianState::vacuum(1), 0, 0.5), 0, 0.3));
  EXPECT_NEAR(sq.semi_major, std::exp(0.5), 1e-12);
  EXPECT_NEAR(sq.semi_minor, std::exp(-0.5), 1e-12);
  EXPECT_NEAR(std::abs(sq.angle), std::numbers::pi / 2 - 0.3, 1e-9);
}
