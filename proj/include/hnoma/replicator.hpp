#ifndef HNOMA_REPLICATOR_HPP
#define HNOMA_REPLICATOR_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "hnoma/ess_solver.hpp"
#include "hnoma/game.hpp"

namespace hnoma {

using ActionPayoffs = std::array<double, 3>;

// Shares below this are treated as extinct.
inline constexpr double kExtinctionFloor = 1e-15;

/// Unnormalized Euler update x_i + mu x_i (u_i - x.u). The increments sum to
/// zero in exact arithmetic.
inline std::array<double, 3> replicator_raw_update(const State& x, const ActionPayoffs& u, double mu) {
  const auto& p = x.probs();
  const double mean = p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
  std::array<double, 3> y{};
  for (std::size_t i = 0; i < 3; ++i) y[i] = p[i] + mu * p[i] * (u[i] - mean);
  return y;
}

/// Guarded replicator update with externally supplied payoffs: shares under
/// the extinction floor (or negative) are zeroed, then the state is
/// renormalized.
inline State replicator_update(const State& x, const ActionPayoffs& u, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("step size mu must be positive");
  auto y = replicator_raw_update(x, u, mu);
  double s = 0.0;
  for (double& v : y) {
    if (!(v >= kExtinctionFloor)) v = 0.0;
    s += v;
  }
  if (!(s > 0.0) || !std::isfinite(s)) throw std::domain_error("replicator update left the simplex");
  for (double& v : y) v /= s;
  return State(y);
}

/// u1(i, x) for i = 1, 2, 3 with costs evaluated at x.
inline ActionPayoffs analytic_payoffs(const State& x, const GameParams& p) {
  const auto A = payoff_matrix_at(x, p);
  return {pure_payoff(Action::High, x, A), pure_payoff(Action::Low, x, A),
          pure_payoff(Action::Silent, x, A)};
}

inline double mean_payoff(const State& x, const ActionPayoffs& u) {
  const auto& p = x.probs();
  return p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
}

/// Max-norm of the replicator drift mu x_i (u_i - x.u).
inline double drift_norm(const State& x, const ActionPayoffs& u, double mu) {
  const double mean = mean_payoff(x, u);
  double m = 0.0;
  for (std::size_t i = 0; i < 3; ++i) m = std::max(m, std::abs(mu * x.probs()[i] * (u[i] - mean)));
  return m;
}

inline State replicator_step(const State& x, const GameParams& p, double mu) {
  return replicator_update(x, analytic_payoffs(x, p), mu);
}

struct ReplicatorOptions {
  double mu = 0.2;
  std::size_t max_iters = 100000;
  double drift_tol = 1e-10;
};

struct Trajectory {
  std::vector<State> states;    // states[k] is the state after k updates
  std::vector<double> payoffs;  // u(x, x) at states[k]
  double step_size = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double final_drift = 0.0;

  const State& final_state() const { return states.back(); }
};

inline Trajectory run_replicator(const State& x0, const GameParams& p, const ReplicatorOptions& opt = {}) {
  if (!x0.interior()) {
    throw std::invalid_argument("initial state must be strictly interior (all components > 0)");
  }
  Trajectory t;
  t.step_size = opt.mu;
  State x = x0;
  for (std::size_t it = 0;; ++it) {
    const auto u = analytic_payoffs(x, p);
    t.states.push_back(x);
    t.payoffs.push_back(mean_payoff(x, u));
    t.final_drift = drift_norm(x, u, opt.mu);
    t.iterations = it;
    if (t.final_drift <= opt.drift_tol) {
      t.converged = true;
      break;
    }
    if (it == opt.max_iters) break;
    x = replicator_update(x, u, opt.mu);
  }
  return t;
}

}  // namespace hnoma

#endif  // HNOMA_REPLICATOR_HPP
