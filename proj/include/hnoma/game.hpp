#ifndef HNOMA_GAME_HPP
#define HNOMA_GAME_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hnoma/rng.hpp"

namespace hnoma {

// Action 1 transmits at the high receive level, action 2 at the low level,
// action 3 stays silent.
enum class Action : int { High = 1, Low = 2, Silent = 3 };

inline constexpr std::array<Action, 3> kActions{Action::High, Action::Low, Action::Silent};

inline std::size_t index_of(Action a) {
  switch (a) {
    case Action::High: return 0;
    case Action::Low: return 1;
    case Action::Silent: return 2;
  }
  throw std::invalid_argument("invalid action " + std::to_string(static_cast<int>(a)));
}

inline Action action_from_number(int i) {
  if (i < 1 || i > 3) {
    throw std::out_of_range("action index must be 1, 2 or 3, got " + std::to_string(i));
  }
  return static_cast<Action>(i);
}

/// Population state: probabilities of actions 1, 2 and 3 on the 2-simplex.
/// Construction validates the simplex; nothing here renormalizes.
class State {
 public:
  static constexpr double kSumTolerance = 1e-12;

  State() : p_{0.0, 0.0, 1.0} {}
  State(double x1, double x2, double x3) : p_{x1, x2, x3} { check(); }
  explicit State(const std::array<double, 3>& p) : p_(p) { check(); }

  static State barycenter() { return State(1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0); }
  static State vertex(Action a) {
    std::array<double, 3> p{0.0, 0.0, 0.0};
    p[index_of(a)] = 1.0;
    return State(p);
  }

  double x1() const { return p_[0]; }
  double x2() const { return p_[1]; }
  double x3() const { return p_[2]; }
  double operator[](Action a) const { return p_[index_of(a)]; }
  const std::array<double, 3>& probs() const { return p_; }

  bool interior() const { return p_[0] > 0.0 && p_[1] > 0.0 && p_[2] > 0.0; }

  friend bool operator==(const State&, const State&) = default;

 private:
  void check() const {
    for (double v : p_) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::domain_error("state component outside [0, 1]: " + std::to_string(v));
      }
    }
    const double s = p_[0] + p_[1] + p_[2];
    if (std::abs(s - 1.0) > kSumTolerance) {
      throw std::domain_error("state components must sum to 1 (sum = " + std::to_string(s) + ")");
    }
  }

  std::array<double, 3> p_;
};

inline double max_abs_diff(const State& a, const State& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < 3; ++i) m = std::max(m, std::abs(a.probs()[i] - b.probs()[i]));
  return m;
}

// Receive levels with minimum power that still allow SIC: the strong signal
// must clear the threshold against the weak one plus noise.
struct PowerLevels {
  double rho1;
  double rho2;
};

inline PowerLevels derive_power_levels(double sinr_threshold) {
  if (!(sinr_threshold > 0.0) || !std::isfinite(sinr_threshold)) {
    throw std::domain_error("SINR threshold must be positive and finite");
  }
  return {sinr_threshold * (1.0 + sinr_threshold), sinr_threshold};
}

struct FixedCosts {
  double C1;
  double C2;
  double C3 = 0.0;
};

// Cost proportional to transmit power: C(P) = c * P.
struct SnrScaledCost {
  double c;
  double C3 = 0.0;
};

using CostModel = std::variant<FixedCosts, SnrScaledCost>;

struct GameParams {
  double reward = 1.0;
  double sinr_threshold = 4.0;
  double rho1 = 20.0;
  double rho2 = 4.0;
  double avg_snr = 10.0;
  CostModel cost = SnrScaledCost{1.0};

  static GameParams snr_scaled(double R, double c, double sinr_threshold, double avg_snr) {
    const auto lv = derive_power_levels(sinr_threshold);
    GameParams p{R, sinr_threshold, lv.rho1, lv.rho2, avg_snr, SnrScaledCost{c}};
    p.validate();
    return p;
  }

  // Fixed costs do not depend on the channel; the threshold and average SNR
  // only matter if the policy is later mapped to thresholds or simulated.
  static GameParams fixed(double R, double C1, double C2, double C3 = 0.0,
                          double sinr_threshold = 4.0, double avg_snr = 10.0) {
    const auto lv = derive_power_levels(sinr_threshold);
    GameParams p{R, sinr_threshold, lv.rho1, lv.rho2, avg_snr, FixedCosts{C1, C2, C3}};
    p.validate();
    return p;
  }

  bool snr_cost() const { return std::holds_alternative<SnrScaledCost>(cost); }

  double cost_scale() const {
    if (const auto* s = std::get_if<SnrScaledCost>(&cost)) return s->c;
    throw std::logic_error("cost_scale() requires the SNR-scaled cost model");
  }

  double silent_cost() const {
    return std::visit([](const auto& m) { return m.C3; }, cost);
  }

  GameParams with_cost_scale(double c) const {
    GameParams p = *this;
    p.cost = SnrScaledCost{c, silent_cost()};
    p.validate();
    return p;
  }

  GameParams with_avg_snr(double g) const {
    GameParams p = *this;
    p.avg_snr = g;
    p.validate();
    return p;
  }

  void validate() const {
    if (!(reward > 0.0)) throw std::invalid_argument("reward R must be positive");
    if (!(sinr_threshold > 0.0)) throw std::invalid_argument("SINR threshold must be positive");
    if (!(avg_snr > 0.0) || !std::isfinite(avg_snr)) {
      throw std::invalid_argument("average SNR must be positive and finite");
    }
    // SIC feasibility with a small relative slack for rounding in rho1.
    const double slack = 1e-12 * sinr_threshold;
    if (rho2 < sinr_threshold - slack || rho1 / (rho2 + 1.0) < sinr_threshold - slack) {
      throw std::invalid_argument("receive levels violate the SIC constraints");
    }
    if (const auto* f = std::get_if<FixedCosts>(&cost)) {
      if (!(f->C1 > f->C2 && f->C2 > 0.0)) {
        throw std::invalid_argument("fixed costs require C1 > C2 > 0");
      }
    } else {
      const auto& s = std::get<SnrScaledCost>(cost);
      if (!(s.c > 0.0) || !std::isfinite(s.c)) {
        throw std::invalid_argument("cost scale c must be positive and finite");
      }
    }
  }
};

struct AverageCosts {
  double C1;
  double C2;
  double C3 = 0.0;
};

/// 3x3 payoff matrix of the two-user block game. Row i is the payoff of
/// action i against each peer action.
class PayoffMatrix {
 public:
  using Rows = std::array<std::array<double, 3>, 3>;

  PayoffMatrix() : a_{} {}
  explicit PayoffMatrix(const Rows& a) : a_(a) {}

  double operator()(Action row, Action col) const { return a_[index_of(row)][index_of(col)]; }
  const Rows& rows() const { return a_; }

  PayoffMatrix shifted(double k) const {
    Rows r = a_;
    for (auto& row : r)
      for (auto& v : row) v += k;
    return PayoffMatrix(r);
  }

  // Row 3 constant, A12 == A13 and A21 == A23.
  bool has_game_structure(double tol = 0.0) const {
    return std::abs(a_[2][0] - a_[2][1]) <= tol && std::abs(a_[2][1] - a_[2][2]) <= tol &&
           std::abs(a_[0][1] - a_[0][2]) <= tol && std::abs(a_[1][0] - a_[1][2]) <= tol;
  }

 private:
  Rows a_;
};

inline PayoffMatrix payoff_matrix(double reward, const AverageCosts& c) {
  if (!std::isfinite(c.C1) || !std::isfinite(c.C2)) {
    throw std::domain_error("average costs must be finite");
  }
  const double R = reward;
  return PayoffMatrix(PayoffMatrix::Rows{{
      {-c.C1, R - c.C1, R - c.C1},
      {R - c.C2, -c.C2, R - c.C2},
      {-c.C3, -c.C3, -c.C3},
  }});
}

inline PayoffMatrix payoff_matrix(const GameParams& params, const AverageCosts& c) {
  return payoff_matrix(params.reward, c);
}

namespace detail {

inline double row_dot(const PayoffMatrix& A, std::size_t i, const std::array<double, 3>& x) {
  const auto& r = A.rows()[i];
  return r[0] * x[0] + r[1] * x[1] + r[2] * x[2];
}

inline double bilinear(const std::array<double, 3>& xbar, const PayoffMatrix& A,
                       const std::array<double, 3>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < 3; ++i) s += xbar[i] * row_dot(A, i, x);
  return s;
}

}  // namespace detail

/// Expected payoff of a pure action i against a peer playing x: e_i^T A x.
inline double pure_payoff(Action i, const State& x, const PayoffMatrix& A) {
  return detail::row_dot(A, index_of(i), x.probs());
}

/// u(xbar, x) = xbar^T A x.
inline double mixed_payoff(const State& xbar, const State& x, const PayoffMatrix& A) {
  return detail::bilinear(xbar.probs(), A, x.probs());
}

inline constexpr double kEquilibriumTolerance = 1e-9;

/// Symmetric mixed-strategy Nash equilibrium test: no pure action beats
/// the state against itself by more than tol.
inline bool is_mixed_ne(const State& x, const PayoffMatrix& A, double tol = kEquilibriumTolerance) {
  const double u = mixed_payoff(x, x, A);
  for (Action a : kActions) {
    if (pure_payoff(a, x, A) > u + tol) return false;
  }
  return true;
}

inline constexpr std::array<double, 4> kDefaultInvasionSizes{0.001, 0.01, 0.1, 0.3};

/// Uniform random state on the simplex drawn from a counter stream.
inline State random_state(CounterStream& rng) {
  const double e1 = -std::log(rng.uniform_open0());
  const double e2 = -std::log(rng.uniform_open0());
  const double e3 = -std::log(rng.uniform_open0());
  const double s = e1 + e2 + e3;
  const double x1 = e1 / s;
  const double x2 = e2 / s;
  return State(x1, x2, std::max(0.0, 1.0 - x1 - x2));
}

/// The three simplex vertices followed by n_random uniform states.
inline std::vector<State> default_mutant_grid(std::uint64_t seed = 7, std::size_t n_random = 12) {
  std::vector<State> g{State::vertex(Action::High), State::vertex(Action::Low),
                       State::vertex(Action::Silent)};
  CounterStream rng(StreamKey{seed, StreamPurpose::Mutant});
  for (std::size_t i = 0; i < n_random; ++i) g.push_back(random_state(rng));
  return g;
}

/// Sampled evolutionary-stability check: for every mutant xbar != x and every
/// invasion size eps, the incumbent must strictly out-earn the mutant in the
/// mixed population eps*xbar + (1-eps)*x. Mutants within tol of x are skipped.
/// Passing is necessary for an ESS but not a proof; the definition quantifies
/// over all mutants.
inline bool is_ess(const State& x, const PayoffMatrix& A, std::span<const State> mutants,
                   std::span<const double> invasion_sizes, double tol = kEquilibriumTolerance) {
  if (mutants.empty() || invasion_sizes.empty()) {
    throw std::invalid_argument("is_ess needs non-empty mutant and invasion-size grids");
  }
  for (double eps : invasion_sizes) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("invasion size must lie in (0, 1)");
  }
  for (const State& m : mutants) {
    if (max_abs_diff(m, x) <= tol) continue;
    for (double eps : invasion_sizes) {
      std::array<double, 3> mix{};
      for (std::size_t i = 0; i < 3; ++i) mix[i] = eps * m.probs()[i] + (1.0 - eps) * x.probs()[i];
      const double incumbent = detail::bilinear(x.probs(), A, mix);
      const double mutant = detail::bilinear(m.probs(), A, mix);
      if (!(incumbent > mutant)) return false;
    }
  }
  return true;
}

inline bool is_ess(const State& x, const PayoffMatrix& A) {
  const auto grid = default_mutant_grid();
  return is_ess(x, A, grid, kDefaultInvasionSizes);
}

}  // namespace hnoma

#endif  // HNOMA_GAME_HPP
