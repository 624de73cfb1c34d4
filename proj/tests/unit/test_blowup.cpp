#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "snls/blowup.hpp"

using namespace snls;

namespace {

BlowupCondition sample_condition() {
  BlowupCondition c;
  c.V0 = 2.0;
  c.G0 = 0.1;
  c.H0 = -1.5;
  c.M0 = 3.0;
  c.fq = 0.2;
  c.damping = 0.1;
  c.sigma = 3.0;
  c.dim = 1;
  c.z = z_floor(c.damping, c.sigma, c.dim);
  return c;
}

}  // namespace

TEST(BlowupCondition, ZFloor) {
  EXPECT_DOUBLE_EQ(z_floor(0.5, 3.0, 1), 6.0);
  EXPECT_DOUBLE_EQ(z_floor(0.0, 3.0, 1), 0.0);
  EXPECT_DOUBLE_EQ(z_floor(1.0, 2.0, 2), 4.0);
}

TEST(BlowupCondition, PolynomialMatchesCoefficientExpansion) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    BlowupCondition c;
    c.V0 = std::abs(u(rng));
    c.G0 = u(rng);
    c.H0 = u(rng);
    c.M0 = std::abs(u(rng));
    c.fq = std::abs(u(rng));
    c.damping = std::abs(u(rng));
    c.z = z_floor(c.damping, c.sigma, c.dim) + std::abs(u(rng));
    const auto k = thm36_coefficients(c);
    const double t = std::abs(u(rng));
    const double horner = (((k[4] * t + k[3]) * t + k[2]) * t + k[1]) * t + k[0];
    EXPECT_NEAR(condition_thm36(c, t), horner, 1e-12 * (1 + std::abs(horner)));
  }
}

TEST(BlowupCondition, ZeroZReducesToConservativeForm) {
  auto c = sample_condition();
  c.damping = 0.0;
  c.z = 0.0;
  for (double t : {0.0, 0.3, 1.0, 4.0}) EXPECT_DOUBLE_EQ(condition_thm36(c, t), condition_conservative(c, t));
}

TEST(BlowupCondition, RejectsOutOfRangeInputs) {
  auto c = sample_condition();
  EXPECT_THROW(condition_thm36(c, -0.1), std::invalid_argument);
  c.z = 0.5 * z_floor(c.damping, c.sigma, c.dim);
  EXPECT_THROW(condition_thm36(c, 0.1), std::invalid_argument);
  EXPECT_THROW(minimal_certified_time(c), std::invalid_argument);
  c = sample_condition();
  c.sigma = 2.0;
  EXPECT_THROW(condition_thm36(c, 0.1), std::invalid_argument);
  c = sample_condition();
  c.fq = -1.0;
  EXPECT_THROW(condition_thm36(c, 0.1), std::invalid_argument);
}

TEST(BlowupCondition, DeterministicQuadraticRoot) {
  // fq = 0, a = 0: V0 + 4 G0 t + 8 H0 t^2 with roots from the quadratic formula.
  BlowupCondition c;
  c.V0 = 1.0;
  c.G0 = 0.5;
  c.H0 = -1.0;
  const double root = (-2.0 - std::sqrt(4.0 + 32.0)) / (2.0 * -8.0);
  const auto t = minimal_certified_time(c);
  ASSERT_TRUE(t);
  EXPECT_NEAR(*t, root, 1e-10 * root);
  EXPECT_LT(condition_thm36(c, *t), 0.0);
}

TEST(BlowupCondition, FirstCrossingOfNonMonotonePolynomial) {
  // V0 + 4 G0 t + 8 H0 t^2 + 4/3 fq M0 t^3 dips below zero and comes back.
  BlowupCondition c;
  c.V0 = 0.1;
  c.G0 = 0.0;
  c.H0 = -1.0;
  c.M0 = 1.0;
  c.fq = 3.0;
  const auto t = minimal_certified_time(c);
  ASSERT_TRUE(t);
  // Brute-force scan oracle.
  double first = -1.0;
  for (int i = 1; i <= 2000000; ++i) {
    const double s = 5.0 * i / 2000000.0;
    if (condition_conservative(c, s) < 0.0) {
      first = s;
      break;
    }
  }
  ASSERT_GT(first, 0.0);
  EXPECT_NEAR(*t, first, 5.0 / 2000000.0);
  EXPECT_GT(condition_conservative(c, 3.0), 0.0);
}

TEST(BlowupCondition, NeverNegativeGivesEmpty) {
  BlowupCondition c;
  c.V0 = 1.0;
  c.G0 = 0.2;
  c.H0 = 0.1;
  c.M0 = 1.0;
  c.fq = 0.1;
  EXPECT_FALSE(minimal_certified_time(c));
  // Touching zero without going strictly negative is not certified.
  BlowupCondition touch;
  touch.V0 = 1.0;
  touch.G0 = -1.0;
  touch.H0 = 0.5;  // 1 - 4t + 4t^2 = (1 - 2t)^2
  EXPECT_FALSE(minimal_certified_time(touch));
  EXPECT_EQ(condition_thm36(touch, 0.5), 0.0);
  EXPECT_TRUE(certify_thm36(touch, {}, 0.5).boundary);
  EXPECT_FALSE(certify_thm36(touch, {}, 0.5).point_certified);
}

TEST(BlowupCondition, MonotoneInNoiseStrength) {
  auto c = sample_condition();
  double prev = -1e300;
  for (double fq : {0.0, 0.1, 0.5, 1.0, 5.0}) {
    c.fq = fq;
    const double v = condition_thm36(c, 0.7);
    EXPECT_GE(v, prev);
    prev = v;
  }
  // Larger damping raises the floor z and therefore the cubic and quartic H0/fq terms.
  c = sample_condition();
  c.fq = 0.0;
  const double base = condition_thm36(c, 0.5);
  c.damping = 0.3;
  c.z = z_floor(c.damping, c.sigma, c.dim);
  EXPECT_LT(condition_thm36(c, 0.5), base);  // H0 < 0 so the z t^3 H0 term is more negative
}

TEST(BlowupCondition, WorstCaseShiftsEveryExpectationUp) {
  auto c = sample_condition();
  ExpectationErrors se{0.1, 0.1, 0.1, 0.1};
  const double t = 0.5;
  const auto v = certify_thm36(c, se, t);
  EXPECT_GT(v.worst_value, v.point_value);
  auto w = c;
  w.V0 += 0.2;
  w.G0 += 0.2;
  w.H0 += 0.2;
  w.M0 += 0.2;
  EXPECT_DOUBLE_EQ(v.worst_value, condition_thm36(w, t));
}

TEST(Prop34, NegativeForStronglyFocusingData) {
  auto c = sample_condition();
  c.fq = 0.0;
  const double b_max = c.damping * (2.0 - 4.0 * c.sigma / (c.sigma * c.dim - 2.0));
  EXPECT_LT(b_max, 0.0);
  const double y = 1.0 / (2.0 * c.damping - b_max);
  EXPECT_DOUBLE_EQ(condition_prop34(c, y, b_max), c.V0 + 4 * y * c.G0 + 16 * y * y * c.H0);
  EXPECT_LT(condition_prop34(c, y, b_max), 0.0);
  EXPECT_THROW(condition_prop34(c, 1.01 * y, b_max), std::invalid_argument);
  EXPECT_THROW(condition_prop34(c, y, b_max + 1e-3), std::invalid_argument);
  EXPECT_THROW(condition_prop34(c, 0.0, b_max), std::invalid_argument);
  c.H0 = 1.0;
  EXPECT_GT(condition_prop34(c, y, b_max), 0.0);
}

TEST(Classify, ReportsThresholdCrossingInLog) {
  const Grid g(1, 10.0, 16);
  TrajectoryState s{0.0, 0, ComplexField(g), Status::completed, {}, std::nullopt, 100.0, 1.0, 0.0, 0.0, {}};
  for (int i = 0; i < 4; ++i) {
    ObservableRecord r;
    r.t = 0.1 * i;
    r.mass = 1.0;
    r.grad_sq = std::pow(10.0, i);
    s.log.push_back(r);
  }
  SimParams p;
  p.dt = 0.1;
  const auto own = classify_trajectory(s, p);
  EXPECT_FALSE(own.blew_up);
  const auto low = classify_trajectory(s, p, 20.0);
  ASSERT_TRUE(low.blew_up);
  EXPECT_DOUBLE_EQ(*low.tau, 0.3);
  EXPECT_EQ(low.points, 16);
  EXPECT_EQ(low.half_width, 10.0);
  EXPECT_EQ(low.dt, 0.1);

  s.status = Status::blew_up;
  s.blowup_time = 0.5;
  const auto nonfinite = classify_trajectory(s, p, 1e6);
  ASSERT_TRUE(nonfinite.blew_up);
  EXPECT_DOUBLE_EQ(*nonfinite.tau, 0.5);
}
