#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <vector>

#include "hnoma/ess_solver.hpp"
#include "hnoma/replicator.hpp"

using namespace hnoma;

namespace {

const GameParams kCostTwo = GameParams::snr_scaled(1.0, 2.0, 4.0, 10.0);
const GameParams kCostOne = GameParams::snr_scaled(1.0, 1.0, 4.0, 10.0);

// Reference ESS states from an independent root solve (scipy brentq on the
// same indifference equations, tolerance 1e-14).
const State kEssC2(0.036052393378, 0.414424896718, 0.549522709904);
const State kEssC1(0.182685305547, 0.486355762004, 0.330958932449);

// Mean of c rho / gamma over the SNR interval (lo, hi] for exponential gamma
// with mean g, divided by the probability of the interval.
double conditional_cost(double c, double rho, double g, double lo, double hi) {
  const auto density_over_gamma = [g](double s) { return std::exp(-s / g) / (g * s); };
  double integral;
  if (std::isinf(hi)) {
    boost::math::quadrature::exp_sinh<double> es;
    integral = es.integrate(density_over_gamma, lo, hi);
  } else {
    boost::math::quadrature::tanh_sinh<double> ts;
    integral = ts.integrate(density_over_gamma, lo, hi);
  }
  const double prob = std::exp(-lo / g) - (std::isinf(hi) ? 0.0 : std::exp(-hi / g));
  return c * rho * integral / prob;
}

}  // namespace

TEST(AverageCost, MatchesDirectIntegrationOverThresholdRegions) {
  const double c = 1.3, g = 10.0;
  const auto lv = derive_power_levels(4.0);
  for (const State& x : {State(0.2, 0.4, 0.4), State(0.05, 0.6, 0.35), State(0.5, 0.1, 0.4), kEssC1}) {
    const auto t = thresholds_from_state(x, g);
    const auto cost = avg_cost_snr(x.x1(), x.x2(), c, lv.rho1, lv.rho2, g);
    EXPECT_NEAR(cost.C1 / conditional_cost(c, lv.rho1, g, t.tau_pn, kInf), 1.0, 1e-9);
    EXPECT_NEAR(cost.C2 / conditional_cost(c, lv.rho2, g, t.tau, t.tau_pn), 1.0, 1e-9);
  }
}

TEST(AverageCost, RemovableLimitsAtExtinctActions) {
  const auto lv = derive_power_levels(4.0);
  const double c = 1.0, g = 10.0;
  // x1 -> 0: C1 vanishes, but only like 1 / ln(1/x1).
  EXPECT_EQ(avg_cost_snr(0.0, 0.5, c, lv.rho1, lv.rho2, g).C1, 0.0);
  EXPECT_NEAR(avg_cost_snr(1e-12, 0.5, c, lv.rho1, lv.rho2, g).C1 / 0.069934368135394455, 1.0, 1e-12);
  const double L = -std::log(1e-300);
  EXPECT_NEAR(avg_cost_snr(1e-300, 0.5, c, lv.rho1, lv.rho2, g).C1 * g * L / (c * lv.rho1), 1.0, 2.0 / L);
  // x2 -> 0: C2 tends to c rho2 / (g ln(1/x1)).
  const double x1 = 0.3;
  const double limit = c * lv.rho2 / (g * std::log(1.0 / x1));
  EXPECT_DOUBLE_EQ(avg_cost_snr(x1, 0.0, c, lv.rho1, lv.rho2, g).C2, limit);
  EXPECT_NEAR(avg_cost_snr(x1, 1e-9, c, lv.rho1, lv.rho2, g).C2, limit, 1e-8);
}

TEST(AverageCost, ScalesInverselyWithAverageSnr) {
  const State x(0.2, 0.5, 0.3);
  const auto near = avg_cost_snr(x, GameParams::snr_scaled(1.0, 1.0, 4.0, 20.0));
  const auto far = avg_cost_snr(x, GameParams::snr_scaled(1.0, 1.0, 4.0, 5.0));
  EXPECT_NEAR(far.C1 / near.C1, 4.0, 1e-12);
  EXPECT_NEAR(far.C2 / near.C2, 4.0, 1e-12);
}

TEST(AverageCost, DomainErrors) {
  const auto lv = derive_power_levels(4.0);
  EXPECT_THROW(avg_cost_snr(0.5, 0.5, 1.0, lv.rho1, lv.rho2, 10.0), InfiniteCostError);
  EXPECT_THROW(avg_cost_snr(-0.1, 0.5, 1.0, lv.rho1, lv.rho2, 10.0), std::domain_error);
  EXPECT_THROW(avg_cost_snr(0.2, -0.1, 1.0, lv.rho1, lv.rho2, 10.0), std::domain_error);
  EXPECT_THROW(payoff_matrix_at(State(0.5, 0.5, 0.0), kCostOne), InfiniteCostError);
}

TEST(FixedCostEss, ClosedFormsPerRegion) {
  auto a = solve_fixed_cost(1.0, 0.7, 0.5);
  EXPECT_EQ(a.regime, Regime::FixedA);
  EXPECT_LT(max_abs_diff(a.state, State(0.3, 0.5, 0.2)), 1e-15);
  EXPECT_TRUE(a.valid);

  auto b = solve_fixed_cost(2.0, 3.0, 0.5);
  EXPECT_EQ(b.regime, Regime::FixedB);
  EXPECT_LT(max_abs_diff(b.state, State(0.0, 0.75, 0.25)), 1e-15);

  auto c = solve_fixed_cost(1.0, 2.0, 1.5);
  EXPECT_EQ(c.regime, Regime::FixedC);
  EXPECT_EQ(c.state, State::vertex(Action::Silent));
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_EQ(c.warnings[0], "no transmission regime");

  auto d = solve_fixed_cost(1.0, 0.4, 0.2);
  EXPECT_EQ(d.regime, Regime::FixedD);
  EXPECT_LT(max_abs_diff(d.state, State(0.4, 0.6, 0.0)), 1e-15);
  ASSERT_EQ(d.warnings.size(), 1u);
  EXPECT_NE(d.warnings[0].find("unbounded transmit power"), std::string::npos);
}

TEST(FixedCostEss, SolutionsAreEquilibriaOfTheirGame) {
  CounterStream rng(StreamKey{17, StreamPurpose::Generic});
  int checked = 0;
  while (checked < 300) {
    const double R = 0.2 + 4.0 * rng.uniform();
    const double C2 = 3.0 * R * rng.uniform();
    const double C1 = C2 + 2.0 * R * rng.uniform();
    if (!(C1 > C2 && C2 > 0.0)) continue;
    EssSolution s;
    try {
      s = solve_fixed_cost(R, C1, C2);
    } catch (const AmbiguousRegionError&) {
      continue;
    }
    const auto A = payoff_matrix(R, AverageCosts{C1, C2, 0.0});
    EXPECT_TRUE(is_mixed_ne(s.state, A, 1e-9 * std::max(1.0, R))) << R << " " << C1 << " " << C2;
    ++checked;
  }
}

TEST(FixedCostEss, RejectsBoundariesAndBadCosts) {
  EXPECT_THROW(solve_fixed_cost(1.0, 1.0, 0.5), AmbiguousRegionError);
  EXPECT_THROW(solve_fixed_cost(1.0, 2.0, 1.0), AmbiguousRegionError);
  EXPECT_THROW(solve_fixed_cost(1.0, 0.6, 0.4), AmbiguousRegionError);
  EXPECT_THROW(solve_fixed_cost(1.0, 0.4, 0.6), std::invalid_argument);
  EXPECT_THROW(solve_fixed_cost(0.0, 0.4, 0.2), std::invalid_argument);
}

TEST(SnrCostEss, MatchesReferenceSolutions) {
  const auto s2 = solve_snr_cost(kCostTwo);
  ASSERT_TRUE(s2.valid) << s2.reason;
  EXPECT_LT(max_abs_diff(s2.state, kEssC2), 1e-9);
  const auto s1 = solve_snr_cost(kCostOne);
  ASSERT_TRUE(s1.valid) << s1.reason;
  EXPECT_LT(max_abs_diff(s1.state, kEssC1), 1e-9);
  EXPECT_EQ(s1.regime, Regime::SnrScaled);
}

TEST(SnrCostEss, AllActionsEarnTheSameAtTheSolution) {
  for (double c : {0.3, 0.5, 1.0, 2.0, 3.0}) {
    const auto p = kCostOne.with_cost_scale(c);
    const auto s = solve_snr_cost(p);
    ASSERT_TRUE(s.valid) << "c = " << c << ": " << s.reason;
    const auto u = analytic_payoffs(s.state, p);
    EXPECT_NEAR(u[0], u[2], 1e-9);
    EXPECT_NEAR(u[1], u[2], 1e-9);
    EXPECT_TRUE(is_mixed_ne(s.state, payoff_matrix_at(s.state, p)));
    EXPECT_TRUE(is_ess(s.state, payoff_matrix_at(s.state, p)));
  }
}

TEST(SnrCostEss, HighLevelShareFallsWithCostAndRisesWithSnr) {
  double prev = 1.0;
  for (double c = 0.25; c <= 3.0 + 1e-12; c += 0.25) {
    const auto s = solve_snr_cost(kCostOne.with_cost_scale(c));
    ASSERT_TRUE(s.valid);
    EXPECT_LT(s.state.x1(), prev);
    prev = s.state.x1();
  }
  prev = 0.0;
  for (double g = 2.0; g <= 50.0; g += 4.0) {
    const auto s = solve_snr_cost(kCostOne.with_avg_snr(g));
    ASSERT_TRUE(s.valid);
    EXPECT_GT(s.state.x1(), prev);
    prev = s.state.x1();
  }
}

TEST(SnrCostEss, ReportsCollapseWhenCostIsTooLow) {
  const auto s = solve_snr_cost(kCostOne.with_cost_scale(0.01));
  EXPECT_FALSE(s.valid);
  EXPECT_EQ(s.reason, "x3 collapsed; increase c");
  EXPECT_FALSE(existence_condition(0.3, kCostOne.with_cost_scale(0.01)));
}

TEST(SnrCostEss, ExpensiveTransmissionIsMostlySilent) {
  const auto s = solve_snr_cost(kCostOne.with_cost_scale(200.0));
  EXPECT_TRUE(s.valid) << s.reason;
  EXPECT_GT(s.state.x3(), 0.9);
}

TEST(SnrCostEss, ExistenceConditionHoldsAtTheSolution) {
  for (double c : {0.5, 1.0, 2.0}) {
    const auto p = kCostOne.with_cost_scale(c);
    EXPECT_TRUE(existence_condition(solve_snr_cost(p).state.x3(), p));
  }
  EXPECT_THROW(existence_condition(0.0, kCostOne), std::domain_error);
  EXPECT_THROW(existence_condition(1.0, kCostOne), std::domain_error);
}

TEST(SnrCostEss, DispatchAndModelChecks) {
  EXPECT_THROW(solve_snr_cost(GameParams::fixed(1.0, 0.7, 0.5)), std::invalid_argument);
  EXPECT_EQ(solve_ess(GameParams::fixed(1.0, 0.7, 0.5)).regime, Regime::FixedA);
  EXPECT_EQ(solve_ess(kCostOne).regime, Regime::SnrScaled);
}
