#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "hnoma/root_finding.hpp"
#include "hnoma/special_math.hpp"

using namespace hnoma;

namespace {

// E1(z) = int_0^inf exp(-z e^u) du after t = z e^u.
double e1_by_quadrature(double z) {
  static boost::math::quadrature::exp_sinh<long double> integrator;
  const long double zl = z;
  const auto f = [zl](long double u) { return std::exp(-zl * std::exp(u)); };
  return static_cast<double>(integrator.integrate(f, 0.0L, std::numeric_limits<long double>::infinity()));
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return v;
}

}  // namespace

TEST(ExpIntegral, FrozenReferenceValues) {
  // 17-digit values from an independent arbitrary-precision evaluation.
  EXPECT_NEAR(exp_integral_e1(1.0), 0.2193839343955205, 1e-16);
  EXPECT_NEAR(exp_integral_e1(1e-6) / 13.23829589306249, 1.0, 1e-14);
  EXPECT_NEAR(exp_integral_e1(0.5) / 0.5597735947761608, 1.0, 1e-14);
  EXPECT_NEAR(exp_integral_e1(2.0) / 0.048900510708061125, 1.0, 1e-14);
  EXPECT_NEAR(exp_integral_e1(10.0) / 4.156968929685325e-06, 1.0, 1e-14);
  EXPECT_NEAR(exp_integral_e1(50.0) / 3.783264029550459e-24, 1.0, 1e-13);
}

TEST(ExpIntegral, MatchesQuadratureAndBoost) {
  for (double z : log_spaced(1e-8, 200.0, 120)) {
    const double q = e1_by_quadrature(z);
    EXPECT_NEAR(exp_integral_e1(z) / q, 1.0, 1e-13) << "z = " << z;
    EXPECT_NEAR(exp_integral_e1(z) / boost::math::expint(1, z), 1.0, 1e-13) << "z = " << z;
  }
}

TEST(ExpIntegral, BranchSeamIsContinuous) {
  const double below = std::nextafter(1.0, 0.0);
  const double above = std::nextafter(1.0, 2.0);
  EXPECT_NEAR(exp_integral_e1(below), exp_integral_e1(above), 1e-15);
}

TEST(ExpIntegral, DerivativeIsMinusExpOverZ) {
  for (double z : {0.01, 0.3, 0.999, 1.001, 4.0, 20.0}) {
    const double h = 1e-5 * z;
    const double fd = (exp_integral_e1(z + h) - exp_integral_e1(z - h)) / (2.0 * h);
    EXPECT_NEAR(fd / (-std::exp(-z) / z), 1.0, 1e-7) << "z = " << z;
  }
}

TEST(ExpIntegral, DecreasingAndWithinElementaryBounds) {
  double prev = std::numeric_limits<double>::infinity();
  for (double z : log_spaced(1e-6, 50.0, 200)) {
    const double e = exp_integral_e1(z);
    EXPECT_LT(e, prev);
    prev = e;
    EXPECT_LE(e, std::exp(-z) * std::log1p(1.0 / z) * (1.0 + 1e-15));
    EXPECT_GT(e, 0.5 * std::exp(-z) * std::log1p(2.0 / z));
  }
}

TEST(ExpIntegral, DomainAndLimits) {
  EXPECT_THROW(exp_integral_e1(0.0), std::domain_error);
  EXPECT_THROW(exp_integral_e1(-1.0), std::domain_error);
  EXPECT_THROW(exp_integral_e1(std::nan("")), std::domain_error);
  EXPECT_EQ(exp_integral_e1(std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_EQ(exp_integral_e1(800.0), 0.0);
}

TEST(ExpIntegralDifference, AccurateForClosePairs) {
  // Exact differences from a 50-digit evaluation at the double-rounded inputs.
  EXPECT_NEAR(exp_integral_e1_difference(0.3, 0.3000001) / 2.4693935339748101e-07, 1.0, 1e-12);
  EXPECT_NEAR(exp_integral_e1_difference(7.0, 7.0000000001) / 1.302688629931230e-14, 1.0, 1e-10);
  EXPECT_NEAR(exp_integral_e1_difference(2.5, 2.6) / 0.003064696066187544, 1.0, 1e-13);
}

TEST(ExpIntegralDifference, AgreesWithPlainDifferenceWhenFarApart) {
  for (double a : {1e-4, 0.2, 1.5, 9.0}) {
    for (double k : {1.5, 2.0, 3.0, 50.0}) {
      const double b = a * k;
      EXPECT_NEAR(exp_integral_e1_difference(a, b), exp_integral_e1(a) - exp_integral_e1(b),
                  1e-13 * exp_integral_e1(a));
    }
    EXPECT_EQ(exp_integral_e1_difference(a, std::numeric_limits<double>::infinity()), exp_integral_e1(a));
    EXPECT_EQ(exp_integral_e1_difference(a, a), 0.0);
  }
  EXPECT_THROW(exp_integral_e1_difference(0.0, 1.0), std::domain_error);
  EXPECT_THROW(exp_integral_e1_difference(2.0, 1.0), std::domain_error);
}

TEST(Thresholds, MatchLogOfShares) {
  const auto t = thresholds_from_state(State(0.035, 0.415, 0.550), 10.0);
  EXPECT_NEAR(t.tau, 10.0 * std::log(1.0 / 0.45), 1e-12);
  EXPECT_NEAR(t.tau, 7.985077, 1e-6);
  EXPECT_NEAR(t.tau_pn, 33.524072, 1e-6);
}

TEST(Thresholds, RoundTripThroughState) {
  CounterStream rng(StreamKey{21, StreamPurpose::Generic});
  for (int i = 0; i < 200; ++i) {
    const State x = random_state(rng);
    for (double g : {0.5, 10.0, 300.0}) {
      const State y = state_from_thresholds(thresholds_from_state(x, g), g);
      EXPECT_LT(max_abs_diff(x, y), 1e-13);
    }
  }
}

TEST(Thresholds, MonotoneInTheShares) {
  // More silence raises tau; more high-level users lower tau_pn.
  const double g = 10.0;
  double prev_tau = -1.0;
  double prev_pn = std::numeric_limits<double>::infinity();
  for (int i = 1; i < 40; ++i) {
    const double x3 = 0.02 * i;
    const double x1 = 0.01 * i;
    const auto t_silence = thresholds_from_state(State(0.2 * (1 - x3), 0.8 * (1 - x3), x3), g);
    EXPECT_GT(t_silence.tau, prev_tau);
    prev_tau = t_silence.tau;
    const auto t_high = thresholds_from_state(State(x1, 0.5 - x1, 0.5), g);
    EXPECT_LT(t_high.tau_pn, prev_pn);
    prev_pn = t_high.tau_pn;
  }
}

TEST(Thresholds, BoundaryStates) {
  const auto none = thresholds_from_state(State::vertex(Action::Silent), 10.0);
  EXPECT_TRUE(std::isinf(none.tau));
  EXPECT_TRUE(std::isinf(none.tau_pn));
  EXPECT_EQ(state_from_thresholds(none, 10.0), State::vertex(Action::Silent));

  const auto no_high = thresholds_from_state(State(0.0, 0.6, 0.4), 10.0);
  EXPECT_TRUE(std::isinf(no_high.tau_pn));
  const auto no_silence = thresholds_from_state(State(0.4, 0.6, 0.0), 10.0);
  EXPECT_EQ(no_silence.tau, 0.0);
  const auto no_low = thresholds_from_state(State(0.3, 0.0, 0.7), 10.0);
  EXPECT_EQ(no_low.tau_pn, no_low.tau);

  EXPECT_THROW((Thresholds{5.0, 4.0}.validate()), std::domain_error);
  EXPECT_THROW((Thresholds{-1.0, 4.0}.validate()), std::domain_error);
  EXPECT_THROW(thresholds_from_state(State::barycenter(), 0.0), std::domain_error);
}

TEST(SnrSampling, ExponentialWithTheAverage) {
  const double g = 7.0;
  CounterStream rng(StreamKey{5, StreamPurpose::Channel});
  const int n = 400000;
  double sum = 0.0;
  int above = 0;
  for (int i = 0; i < n; ++i) {
    const double s = sample_snr(g, rng);
    ASSERT_GE(s, 0.0);
    ASSERT_TRUE(std::isfinite(s));
    sum += s;
    above += s > 10.0 ? 1 : 0;
  }
  const double se_mean = g / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(sum / n, g, 4.0 * se_mean);
  const double p = std::exp(-10.0 / g);
  EXPECT_NEAR(static_cast<double>(above) / n, p, 4.0 * std::sqrt(p * (1 - p) / n));
  EXPECT_EQ(snr_from_uniform(g, 1.0), 0.0);
  EXPECT_THROW(sample_snr(0.0, rng), std::domain_error);
}

TEST(SnrSampling, ConditionalDrawsStayInTheirRegion) {
  const double g = 10.0;
  CounterStream rng(StreamKey{9, StreamPurpose::Channel});
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lo_hi = sample_snr_between(g, 3.0, 12.0, rng);
    ASSERT_GT(lo_hi, 3.0);
    ASSERT_LE(lo_hi, 12.0);
    const double tail = sample_snr_between(g, 20.0, kInf, rng);
    ASSERT_GT(tail, 20.0);
    sum += tail;
  }
  // Memorylessness: E[gamma | gamma > 20] = 20 + g.
  EXPECT_NEAR(sum / n, 20.0 + g, 4.0 * g / std::sqrt(static_cast<double>(n)));
}

TEST(RootFinding, SolvesSmoothEquations) {
  const auto r = find_root([](double x) { return std::cos(x) - x; }, 0.0, 1.0);
  EXPECT_NEAR(r.x, 0.7390851332151607, 1e-12);
  const auto cubic = find_root([](double x) { return x * x * x - 2.0; }, 0.0, 5.0);
  EXPECT_NEAR(cubic.x, std::cbrt(2.0), 1e-12);
}

TEST(RootFinding, HandlesBracketsSpanningManyDecades) {
  const auto r = find_root([](double x) { return std::log(x) + 600.0; }, 1e-300, 1.0);
  EXPECT_NEAR(std::log(r.x), -600.0, 1e-9);
  EXPECT_LT(r.iterations, 400);
}

TEST(RootFinding, RejectsMissingSignChange) {
  EXPECT_THROW(find_root([](double x) { return x * x + 1.0; }, -1.0, 1.0), NoBracketError);
  EXPECT_THROW(find_root([](double x) { return x; }, 1.0, 0.0), std::invalid_argument);
  const auto exact = find_root([](double x) { return x - 1.0; }, 1.0, 2.0);
  EXPECT_EQ(exact.x, 1.0);
}
