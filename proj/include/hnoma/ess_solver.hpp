#ifndef HNOMA_ESS_SOLVER_HPP
#define HNOMA_ESS_SOLVER_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hnoma/game.hpp"
#include "hnoma/root_finding.hpp"
#include "hnoma/special_math.hpp"

namespace hnoma {

class InfiniteCostError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class AmbiguousRegionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Conditional mean costs of actions 1 and 2 under Rayleigh fading when the
/// cost is c times the transmit power, for a state with the given x1, x2.
/// Removable singularities at x1 = 0 or x2 = 0 take their limit values.
inline AverageCosts avg_cost_snr(double x1, double x2, double c, double rho1, double rho2,
                                 double avg_snr, double C3 = 0.0) {
  if (!(x1 >= 0.0 && x1 < 1.0) || !(x2 >= 0.0)) {
    throw std::domain_error("avg_cost_snr needs x1 in [0, 1) and x2 >= 0");
  }
  const double active = x1 + x2;
  if (active >= 1.0) {
    throw InfiniteCostError("x1 + x2 = 1 (no truncation): the average power of action 2 is infinite");
  }
  const double a = -std::log(active);                    // tau / avg_snr
  const double b = x1 > 0.0 ? -std::log(x1) : kInf;      // tau_pn / avg_snr
  AverageCosts out{0.0, 0.0, C3};
  if (x1 > 0.0) out.C1 = c * rho1 / (avg_snr * x1) * exp_integral_e1(b);
  if (x2 > 0.0) {
    // b - a = log1p(x2 / x1) keeps its precision when x2 << x1.
    const double gap = x1 > 0.0 ? std::log1p(x2 / x1) : kInf;
    const double diff = gap <= a ? exp_integral_e1_span(a, gap) : exp_integral_e1(a) - exp_integral_e1(b);
    out.C2 = c * rho2 / (avg_snr * x2) * diff;
  } else if (x1 > 0.0) {
    out.C2 = c * rho2 / (avg_snr * b);
  }
  return out;
}

inline AverageCosts avg_cost_snr(const State& x, const GameParams& p) {
  const double c = p.cost_scale();
  return avg_cost_snr(x.x1(), x.x2(), c, p.rho1, p.rho2, p.avg_snr, p.silent_cost());
}

/// Average costs at a state for either cost model.
inline AverageCosts average_costs(const State& x, const GameParams& p) {
  if (const auto* f = std::get_if<FixedCosts>(&p.cost)) return {f->C1, f->C2, f->C3};
  return avg_cost_snr(x, p);
}

inline PayoffMatrix payoff_matrix_at(const State& x, const GameParams& p) {
  return payoff_matrix(p.reward, average_costs(x, p));
}

enum class Regime { FixedA, FixedB, FixedC, FixedD, SnrScaled };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::FixedA: return "A";
    case Regime::FixedB: return "B";
    case Regime::FixedC: return "C";
    case Regime::FixedD: return "D";
    case Regime::SnrScaled: return "snr-scaled";
  }
  return "?";
}

struct EssSolution {
  State state;
  Regime regime = Regime::SnrScaled;
  double residual1 = 0.0;
  double residual2 = 0.0;
  bool valid = true;
  std::string reason;
  std::vector<std::string> warnings;
};

/// Closed-form ESS for constant costs (C3 = 0). Inputs on a region boundary,
/// within a 1e-12 guard band, are rejected.
inline EssSolution solve_fixed_cost(double R, double C1, double C2) {
  if (!(R > 0.0)) throw std::invalid_argument("R must be positive");
  if (!(C1 > C2 && C2 > 0.0)) throw std::invalid_argument("fixed costs require C1 > C2 > 0");
  const double g = 1e-12 * std::max(1.0, R);
  const auto near = [g](double a, double b) { return std::abs(a - b) <= g; };
  if (near(C1, R) || near(C2, R) || near(C1 + C2, R)) {
    throw AmbiguousRegionError("costs lie on a region boundary (C1 = R, C2 = R or C1 + C2 = R)");
  }
  EssSolution s;
  if (C1 + C2 < R) {
    const double dc = C1 - C2;
    const double x1 = 0.5 * (1.0 - dc / R);
    s.state = State(x1, 1.0 - x1, 0.0);
    s.regime = Regime::FixedD;
    s.residual1 = (R * (1.0 - x1) - C1) - (R * (1.0 - s.state.x2()) - C2);
    s.warnings.push_back("x3 = 0: channel inversion without truncation, unbounded transmit power");
  } else if (C1 < R) {
    const double x1 = 1.0 - C1 / R;
    const double x2 = 1.0 - C2 / R;
    s.state = State(x1, x2, 1.0 - x1 - x2);
    s.regime = Regime::FixedA;
    s.residual1 = R * (1.0 - x1) - C1;
    s.residual2 = R * (1.0 - x2) - C2;
  } else if (C2 < R) {
    const double x2 = 1.0 - C2 / R;
    s.state = State(0.0, x2, 1.0 - x2);
    s.regime = Regime::FixedB;
    s.residual1 = R * (1.0 - x2) - C2;
  } else {
    s.state = State(0.0, 0.0, 1.0);
    s.regime = Regime::FixedC;
    s.warnings.push_back("no transmission regime");
  }
  return s;
}

inline EssSolution solve_fixed_cost(const GameParams& p) {
  const auto& f = std::get<FixedCosts>(p.cost);
  return solve_fixed_cost(p.reward, f.C1, f.C2);
}

/// Sufficient condition for a root of the x1 equation below 1 - x3.
inline bool existence_condition(double x3, const GameParams& p) {
  if (!(x3 > 0.0 && x3 < 1.0)) throw std::domain_error("existence_condition needs x3 in (0, 1)");
  const double lhs = p.cost_scale() * p.rho1 / p.avg_snr;
  const double rhs = p.reward * x3 * (1.0 - x3) / exp_integral_e1(-std::log1p(-x3));
  return lhs > rhs;
}

struct SnrSolverOptions {
  double lower = 1e-9;
  double upper = 1.0 - 1e-9;
  RootOptions root{};
  double collapse_margin = 1e-6;
  // Lower end is pushed down geometrically to this value before an action
  // is declared extinct.
  double smallest_lower = 1e-300;
};

namespace detail {

// Lower end of a bracket where f > 0, searching down geometrically from lo.
template <class F>
double positive_lower_end(F&& f, double lo, double smallest) {
  while (lo >= smallest) {
    if (f(lo) > 0.0) return lo;
    lo *= 1e-8;
  }
  return 0.0;
}

}  // namespace detail

/// ESS under SNR-scaled costs. Solves the action-1 indifference equation on
/// (0, 1) first, then the action-2 equation on (0, 1 - x1*).
inline EssSolution solve_snr_cost(const GameParams& p, const SnrSolverOptions& opt = {}) {
  if (!p.snr_cost()) throw std::invalid_argument("solve_snr_cost needs the SNR-scaled cost model");
  const double R = p.reward;
  const double c = p.cost_scale();
  const double k1 = c * p.rho1 / p.avg_snr;

  const auto f1 = [&](double x) {
    return R * (1.0 - x) - k1 * exp_integral_e1(-std::log(x)) / x;
  };

  EssSolution s;
  s.regime = Regime::SnrScaled;

  double x1 = 0.0;
  const double lo1 = detail::positive_lower_end(f1, opt.lower, opt.smallest_lower);
  if (lo1 > 0.0) {
    const auto r = find_root(f1, lo1, opt.upper, opt.root);
    x1 = r.x;
    s.residual1 = r.fx;
  } else {
    s.warnings.push_back("x1* below numerical resolution; action 1 treated as extinct");
  }

  const double room = 1.0 - x1;
  const auto f2 = [&](double x) {
    if (x1 + x >= 1.0) return -kInf;
    return R * (1.0 - x) - avg_cost_snr(x1, x, c, p.rho1, p.rho2, p.avg_snr).C2;
  };
  const double hi2 = room * (1.0 - 1e-9);
  double x2 = 0.0;
  if (f2(hi2) > 0.0) {
    s.state = State(x1, room, 0.0);
    s.valid = false;
    s.reason = "x3 collapsed; increase c";
    return s;
  }
  const double lo2 = detail::positive_lower_end(f2, std::min(opt.lower, 0.5 * hi2), opt.smallest_lower);
  if (lo2 > 0.0) {
    const auto r = find_root(f2, lo2, hi2, opt.root);
    x2 = r.x;
    s.residual2 = r.fx;
  } else {
    s.warnings.push_back("x2* below numerical resolution; action 2 treated as extinct");
  }

  const double x3 = std::max(0.0, 1.0 - x1 - x2);
  s.state = State(x1, x2, x3);
  if (x1 + x2 >= 1.0 - opt.collapse_margin) {
    s.valid = false;
    s.reason = "x3 collapsed; increase c";
  } else if (std::abs(s.residual1) > opt.root.f_tol || std::abs(s.residual2) > opt.root.f_tol) {
    s.valid = false;
    s.reason = "root residual above tolerance";
  }
  return s;
}

/// Dispatches on the cost model.
inline EssSolution solve_ess(const GameParams& p) {
  return p.snr_cost() ? solve_snr_cost(p) : solve_fixed_cost(p);
}

}  // namespace hnoma

#endif  // HNOMA_ESS_SOLVER_HPP
