#ifndef HNOMA_SPECIAL_MATH_HPP
#define HNOMA_SPECIAL_MATH_HPP

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "hnoma/game.hpp"
#include "hnoma/rng.hpp"

namespace hnoma {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Exponential integral E1(z) = int_z^inf e^{-t}/t dt for z > 0.
/// Power series up to z = 1, modified Lentz continued fraction above.
inline double exp_integral_e1(double z) {
  if (!(z > 0.0)) throw std::domain_error("E1(z) requires z > 0");
  if (z == kInf) return 0.0;
  constexpr double eps = 1e-17;
  if (z <= 1.0) {
    double sum = 0.0;
    double term = 1.0;  // z^k / k!
    for (int k = 1; k < 100; ++k) {
      term *= z / k;
      const double add = (k % 2 == 1 ? term : -term) / k;
      sum += add;
      if (std::abs(add) < eps * std::abs(sum)) break;
    }
    return -std::numbers::egamma - std::log(z) + sum;
  }
  constexpr double tiny = 1e-300;
  double b = z + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h * std::exp(-z);
}

namespace detail {

template <int N>
struct GaussLegendre {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  GaussLegendre() {
    for (int i = 0; i < N; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= N; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double dp = N * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) {
          nodes[i] = x;
          weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
          break;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
      }
    }
  }
};

inline const GaussLegendre<16>& gauss_legendre16() {
  static const GaussLegendre<16> gl;
  return gl;
}

}  // namespace detail

/// Integral of exp(-t)/t over [a, a + w], taken directly by Gauss-Legendre.
/// Accurate for w <= a, where the plain E1 difference would cancel.
inline double exp_integral_e1_span(double a, double w) {
  if (!(a > 0.0) || !(w >= 0.0)) throw std::domain_error("E1 span needs a > 0 and w >= 0");
  if (w == 0.0) return 0.0;
  const auto& gl = detail::gauss_legendre16();
  const double half = 0.5 * w;
  const double mid = a + half;
  double s = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    const double t = mid + half * gl.nodes[i];
    s += gl.weights[i] * std::exp(-t) / t;
  }
  return half * s;
}

/// E1(a) - E1(b) for 0 < a <= b <= inf.
inline double exp_integral_e1_difference(double a, double b) {
  if (!(a > 0.0) || !(b >= a)) throw std::domain_error("E1 difference needs 0 < a <= b");
  if (b > 2.0 * a) return exp_integral_e1(a) - exp_integral_e1(b);
  return exp_integral_e1_span(a, b - a);
}

/// Truncation thresholds of the power-control policy (linear SNR).
/// Action 1 above tau_pn, action 2 on (tau, tau_pn], silence at or below tau.
/// tau_pn == tau means action 2 is never used; tau_pn == inf disables action 1.
struct Thresholds {
  double tau = 0.0;
  double tau_pn = kInf;

  void validate() const {
    if (!(tau >= 0.0)) throw std::domain_error("tau must be non-negative");
    if (!(tau_pn >= tau)) throw std::domain_error("tau_pn must not be below tau");
  }
};

inline Thresholds thresholds_from_state(const State& x, double avg_snr) {
  if (!(avg_snr > 0.0)) throw std::domain_error("average SNR must be positive");
  Thresholds t;
  if (x.x1() + x.x2() <= 0.0) return {kInf, kInf};
  t.tau = x.x3() <= 0.0 ? 0.0 : -avg_snr * std::log1p(-x.x3());
  t.tau_pn = x.x1() <= 0.0 ? kInf : -avg_snr * std::log(x.x1());
  if (x.x2() <= 0.0 || t.tau_pn < t.tau) t.tau_pn = t.tau;
  return t;
}

inline State state_from_thresholds(const Thresholds& t, double avg_snr) {
  t.validate();
  if (!(avg_snr > 0.0)) throw std::domain_error("average SNR must be positive");
  const double x1 = std::exp(-t.tau_pn / avg_snr);
  const double x3 = -std::expm1(-t.tau / avg_snr);
  const double x2 = std::max(0.0, std::exp(-t.tau / avg_snr) - x1);
  return State(x1, x2, x3);
}

/// Inverse-CDF map of a uniform draw on (0, 1] to an exponential SNR.
inline double snr_from_uniform(double avg_snr, double u) { return -avg_snr * std::log(u); }

/// Rayleigh fading: |h|^2/N0 is exponential with mean avg_snr.
inline double sample_snr(double avg_snr, CounterStream& rng) {
  if (!(avg_snr > 0.0)) throw std::domain_error("average SNR must be positive");
  return snr_from_uniform(avg_snr, rng.uniform_open0());
}

/// SNR drawn conditionally on lo < gamma <= hi.
inline double sample_snr_between(double avg_snr, double lo, double hi, CounterStream& rng) {
  const double p_hi = std::exp(-lo / avg_snr);  // P(gamma > lo)
  const double p_lo = std::exp(-hi / avg_snr);  // P(gamma > hi)
  // Survival value uniform on [p_lo, p_hi), mapped back through the inverse CDF.
  const double s = p_lo + (p_hi - p_lo) * rng.uniform_open0();
  double g = -avg_snr * std::log(s);
  if (g <= lo) g = std::nextafter(lo, kInf);
  if (g > hi) g = hi;
  return g;
}

}  // namespace hnoma

#endif  // HNOMA_SPECIAL_MATH_HPP
