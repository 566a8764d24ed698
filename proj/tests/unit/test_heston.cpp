#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "deepsvm/errors.hpp"
#include "deepsvm/heston.hpp"

namespace deepsvm {
namespace {

TEST(Feller, StrictInequality) {
  EXPECT_TRUE(feller_holds({2.0, 0.09, 0.3, -0.5, 0.02}));
  EXPECT_FALSE(feller_holds({0.5, 0.01, 1.0, -0.5, 0.02}));
  // 2 * 0.5 * 0.01 == 0.1^2: equality is rejected.
  EXPECT_FALSE(feller_holds({0.5, 0.01, 0.1, -0.5, 0.02}));
}

TEST(Payoff, Values) {
  EXPECT_EQ(payoff(0.0), 0.0);
  EXPECT_NEAR(payoff(std::log(2.0)), 1.0, 1e-15);
  EXPECT_EQ(payoff(-3.0), 0.0);
}

TEST(Payoff, NonNegativeAndMonotone) {
  double prev = payoff(-5.0);
  for (int i = -499; i <= 500; ++i) {
    const double v = payoff(i * 0.01);
    EXPECT_GE(v, 0.0);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Boundary, UpperTargets) {
  EXPECT_NEAR(boundary_upper(2.0, 0.0, 1.0), std::exp(2.0) - 1.0, 1e-14);
  EXPECT_NEAR(boundary_upper(2.0, 0.0, 1.0), 6.389056, 1e-6);
  EXPECT_NEAR(boundary_upper(2.0, 0.02, 0.0), std::exp(2.0) - 1.0, 1e-14);
  EXPECT_NEAR(boundary_upper(2.0, 0.05, 1.0), 6.437827, 1e-6);
}

TEST(Boundary, UpperDominatesIntrinsic) {
  for (double r : {0.0, 0.01, 0.05, 0.08})
    for (double tau : {0.0, 0.3, 1.0}) EXPECT_GE(boundary_upper(2.0, r, tau), std::exp(2.0) - 1.0);
}

TEST(Boundary, LowerIsZero) {
  static_assert(boundary_lower() == 0.0);
  double sum = 0.0;
  for (int i = 0; i < 2048; ++i) sum += boundary_lower();
  EXPECT_EQ(sum, 0.0);
}

TEST(Normalize, KnownValues) {
  const DomainBounds b;
  HestonParams p{3.0, 0.04, 0.3, -0.5, 0.02};
  DomainPoint d{0.0, 0.2075, 0.5};
  const auto z = normalize_inputs(p, d, b);
  EXPECT_NEAR(z[0], 1.0, 1e-15);        // kappa upper edge
  EXPECT_NEAR(z[5], 0.0, 1e-15);        // x midpoint
  EXPECT_NEAR(z[6], 0.0128205, 1e-7);   // (0.2075 - 0.205) / 0.195
}

TEST(Normalize, RoundTrip) {
  const DomainBounds b;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto axes = b.axes();
    NormalizedInputs raw;
    for (int k = 0; k < 8; ++k) raw[k] = axes[k].lo + (axes[k].hi - axes[k].lo) * u(rng);
    HestonParams p{raw[0], raw[1], raw[2], raw[3], raw[4]};
    DomainPoint d{raw[5], raw[6], raw[7]};
    HestonParams p2;
    DomainPoint d2;
    denormalize_inputs(normalize_inputs(p, d, b), b, p2, d2);
    const std::array<double, 8> back{p2.kappa, p2.theta, p2.sigma, p2.rho, p2.r, d2.x, d2.nu, d2.tau};
    for (int k = 0; k < 8; ++k)
      EXPECT_NEAR(back[k], raw[k], 1e-12 * std::max(1.0, std::abs(raw[k])));
  }
}

TEST(Normalize, OutOfBoundsNamesAxis) {
  try {
    normalize_inputs({2.0, 0.04, 0.3, -0.5, 0.02}, {2.5, 0.04, 0.5});
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_EQ(e.axis(), "x");
  }
  try {
    normalize_inputs({2.0, 0.04, 0.3, -0.5, 0.09}, {0.0, 0.04, 0.5});
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_EQ(e.axis(), "r");
  }
}

TEST(Bounds, FellerViolationRejected) {
  EXPECT_THROW(check_in_bounds({0.5, 0.01, 1.0, -0.5, 0.02}, {0.0, 0.04, 0.5}), DomainError);
  EXPECT_NO_THROW(check_in_bounds({2.0, 0.09, 0.3, -0.5, 0.02}, {0.0, 0.04, 0.5}));
}

TEST(Bounds, ValidateRejectsEmptyInterval) {
  DomainBounds b;
  b.nu = {0.4, 0.01};
  EXPECT_THROW(b.validate(), ArgumentError);
}

}  // namespace
}  // namespace deepsvm
