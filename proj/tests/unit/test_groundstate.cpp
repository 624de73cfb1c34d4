#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "snls/groundstate.hpp"
#include "snls/observables.hpp"

using namespace snls;
using std::numbers::pi;

namespace {

double gn_ratio_of(const ComplexField& f, double sigma, double C) {
  return gn_ratio(norm_lp_pow(f, 2 * sigma + 2), gradient_norm_sq(f), norm_l2_sq(f), sigma, f.grid.dim(), C);
}

}  // namespace

TEST(GroundState, QuinticMassMatchesClosedForm) {
  const auto gs = ground_state_1d(2.0, Grid(1, 20.0, 2048));
  // sqrt(3) int sech(2x) dx = sqrt(3) pi / 2.
  EXPECT_NEAR(gs.mass_sq, std::sqrt(3.0) * pi / 2.0, 1e-6);
  EXPECT_NEAR(ground_state_mass_exact(2.0), std::sqrt(3.0) * pi / 2.0, 1e-14);
  // Cubic case: R = sqrt(2) sech(x), ||R||^2 = 4.
  EXPECT_NEAR(ground_state_mass_exact(1.0), 4.0, 1e-13);
}

TEST(GroundState, QuinticProfileMatchesCoshForm) {
  const Grid g(1, 20.0, 512);
  const auto gs = ground_state_1d(2.0, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.coordinate(int(i));
    EXPECT_NEAR(gs.profile[i].real(), std::pow(3.0, 0.25) / std::sqrt(std::cosh(2 * x)), 1e-12);
  }
}

TEST(GroundState, ProfileIsPositiveEvenAndDecaying) {
  const Grid g(1, 20.0, 256);
  const auto gs = ground_state_1d(3.0, g);
  for (int j = 1; j < g.points() / 2; ++j) {
    EXPECT_GT(gs.profile[std::size_t(j)].real(), 0.0);
    EXPECT_NEAR(gs.profile[std::size_t(j)].real(), gs.profile[std::size_t(g.points() - j)].real(), 1e-15);
    EXPECT_LT(gs.profile[std::size_t(j)].real(), gs.profile[std::size_t(j + 1)].real());
  }
}

TEST(GroundState, OdeResidualIsSmallForSeveralExponents) {
  for (double sigma : {1.0, 1.5, 2.0, 3.0}) {
    const auto gs = ground_state_1d(sigma, Grid(1, 20.0, 2048));
    EXPECT_LT(gs.ode_residual, 1e-8) << "sigma " << sigma;
  }
}

TEST(GroundState, RejectsBoxThatCutsTheTail) {
  EXPECT_THROW(ground_state_1d(2.0, Grid(1, 5.0, 128)), std::invalid_argument);
  EXPECT_THROW(ground_state_1d(0.0, Grid(1, 20.0, 128)), std::invalid_argument);
  EXPECT_THROW(ground_state_1d(2.0, Grid(2, 20.0, 16)), std::invalid_argument);
}

TEST(GnConstant, FormulaEvaluation) {
  // With ||R||^2 = pi sqrt(3) the formula gives 3 / ||R||^4 = 1 / pi^2.
  EXPECT_NEAR(gn_constant(2.0, 1, pi * std::sqrt(3.0)), 1.0 / (pi * pi), 1e-12);
  // With the true quintic mass sqrt(3) pi / 2 it gives 4 / pi^2.
  EXPECT_NEAR(gn_constant(2.0, 1, ground_state_mass_exact(2.0)), 4.0 / (pi * pi), 1e-12);
  // Mass-critical pairs reduce to (sigma + 1) / ||R||^{2 sigma}.
  EXPECT_NEAR(gn_constant(1.0, 2, 5.85), 2.0 / 5.85, 1e-14);
  EXPECT_NEAR(gn_constant(2.0, 1, 3.1), 3.0 / (3.1 * 3.1), 1e-14);
  EXPECT_THROW(gn_constant(0.0, 1, 1.0), std::invalid_argument);
  EXPECT_THROW(gn_constant(2.5, 3, 1.0), std::invalid_argument);
  EXPECT_THROW(gn_constant(1.0, 1, 0.0), std::invalid_argument);
}

TEST(GnConstant, RatioIsOneAtTheGroundState) {
  for (double sigma : {1.0, 2.0, 3.0}) {
    const auto gs = ground_state_1d(sigma, Grid(1, 20.0, 2048));
    EXPECT_NEAR(gn_ratio_of(gs.profile, sigma, gs.gn_constant), 1.0, 1e-6) << "sigma " << sigma;
  }
}

TEST(GnConstant, InequalityHoldsOnRandomPositiveFields) {
  const Grid g(1, 20.0, 1024);
  const double sigma = 2.0;
  const auto gs = ground_state_1d(sigma, g);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 200; ++trial) {
    const double w = 0.5 + std::abs(n(rng));
    const double a1 = 0.3 * n(rng), a2 = 0.3 * n(rng), shift = n(rng);
    const auto f = ComplexField::sample(g, [&](double x) {
      const double s = 1.0 + a1 * std::cos(x) + a2 * std::sin(2 * x);
      return std::exp(-(x - shift) * (x - shift) / w) * s * s;
    });
    EXPECT_LE(gn_ratio_of(f, sigma, gs.gn_constant), 1.0 + 1e-9);
  }
}

TEST(GnConstant, RatioApproachesOneTowardsGroundState) {
  const Grid g(1, 20.0, 1024);
  const auto gs = ground_state_1d(2.0, g);
  double prev_gap = 1.0;
  for (double eps : {0.3, 0.1, 0.03, 0.01}) {
    const auto f = ComplexField::sample(g, [&](double x) {
      return ground_state_profile(2.0, x) * (1.0 + eps * std::exp(-x * x) * std::cos(3 * x));
    });
    const double gap = 1.0 - gn_ratio_of(f, 2.0, gs.gn_constant);
    EXPECT_GE(gap, -1e-9);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 1e-3);
}

TEST(GnConstant, RatioIsScaleInvariant) {
  const Grid g(1, 20.0, 2048);
  auto profile = [](double x) { return std::exp(-x * x) * (1.0 + 0.3 * std::cos(x)); };
  const auto f = ComplexField::sample(g, profile);
  const double C = 0.37;
  const double base = gn_ratio_of(f, 2.0, C);
  for (auto [c, mu] : {std::pair{1.7, 1.3}, std::pair{0.4, 0.8}, std::pair{3.0, 2.0}}) {
    const auto h = ComplexField::sample(g, [&](double x) { return c * profile(mu * x); });
    EXPECT_NEAR(gn_ratio_of(h, 2.0, C), base, 1e-10 * base);
  }
}

TEST(Threshold, CriticalMassAndClassification) {
  const double thr = threshold_mass(2.0, 1);
  EXPECT_NEAR(thr, std::sqrt(std::sqrt(3.0) * pi / 2.0), 1e-14);
  EXPECT_THROW(threshold_mass(3.0, 1), std::invalid_argument);
  EXPECT_THROW(threshold_mass(1.0, 2), std::invalid_argument);

  EXPECT_EQ(classify_threshold(0.999 * thr, thr), ThresholdClass::below);
  const auto gs = ground_state_1d(2.0, Grid(1, 20.0, 1024));
  EXPECT_EQ(classify_threshold(std::sqrt(norm_l2_sq(gs.profile)), thr), ThresholdClass::at);
  EXPECT_EQ(classify_threshold(1.2 * thr, thr), ThresholdClass::above);
}
