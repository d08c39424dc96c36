#ifndef HNOMA_ADAPTIVE_HPP
#define HNOMA_ADAPTIVE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hnoma/ess_solver.hpp"
#include "hnoma/game.hpp"
#include "hnoma/noma_sim.hpp"
#include "hnoma/parallel.hpp"
#include "hnoma/replicator.hpp"

namespace hnoma {

inline constexpr double kUnknown = std::numeric_limits<double>::quiet_NaN();

/// State updates happen once per block of B slots. The cost scale of block
/// b (1-based) is slope * b + offset, held constant within the block.
struct BlockSchedule {
  std::size_t slots_per_block = 40;
  std::size_t num_blocks = 200;
  double slope = 0.0;
  double offset = 1.0;

  static BlockSchedule constant(std::size_t B, std::size_t n, double c) { return {B, n, 0.0, c}; }
  static BlockSchedule ramp(std::size_t B, std::size_t n, double slope, double offset) {
    return {B, n, slope, offset};
  }

  double c_at(std::size_t b) const { return slope * static_cast<double>(b) + offset; }

  void validate() const {
    if (slots_per_block < 1) throw std::invalid_argument("B must be at least 1");
    if (num_blocks < 1) throw std::invalid_argument("need at least one block");
    if (!(c_at(1) > 0.0) || !(c_at(num_blocks) > 0.0)) {
      throw std::invalid_argument("cost scale c[b] must stay positive over the schedule");
    }
  }
};

/// c_k proportional to the user's average SNR, which makes the average costs
/// independent of the SNR.
inline double fairness_scale(double user_avg_snr, double c_ref, double ref_avg_snr) {
  if (!(user_avg_snr > 0.0) || !(ref_avg_snr > 0.0)) {
    throw std::domain_error("average SNRs must be positive");
  }
  return c_ref * (user_avg_snr / ref_avg_snr);
}

enum class EstimatorMode {
  Unconditional,  // (R / 2M) * sum_m Y_m(t; i): unconditional per-user success rate
  Conditional,   // R * successes of action-i users / action-i attempts
};

/// Per-slot decode tally over all M blocks.
struct SlotTally {
  std::array<std::uint64_t, 2> attempts{};
  std::array<std::uint64_t, 2> successes{};  // Y summed over blocks, by action
  std::size_t blocks = 0;
};

inline SlotTally tally_slot(std::span<const SlotOutcome> outcomes) {
  SlotTally t;
  t.blocks = outcomes.size();
  for (const auto& so : outcomes) {
    for (const auto& u : so.users) {
      const std::size_t ai = index_of(u.action);
      if (ai < 2) {
        ++t.attempts[ai];
        t.successes[ai] += u.success ? 1 : 0;
      }
    }
  }
  return t;
}

struct RewardEstimate {
  double R1 = kUnknown;
  double R2 = kUnknown;
};

/// Reward estimates of actions 1 and 2 from one slot. In conditional mode an
/// action nobody attempted keeps the previous slot's value.
inline RewardEstimate estimate_reward(const SlotTally& t, double R, EstimatorMode mode,
                                      const RewardEstimate& previous = {}) {
  RewardEstimate e;
  if (mode == EstimatorMode::Unconditional) {
    const double norm = R / (2.0 * static_cast<double>(t.blocks));
    e.R1 = norm * static_cast<double>(t.successes[0]);
    e.R2 = norm * static_cast<double>(t.successes[1]);
    return e;
  }
  e.R1 = t.attempts[0] ? R * static_cast<double>(t.successes[0]) / t.attempts[0] : previous.R1;
  e.R2 = t.attempts[1] ? R * static_cast<double>(t.successes[1]) / t.attempts[1] : previous.R2;
  return e;
}

inline RewardEstimate estimate_reward(std::span<const SlotOutcome> outcomes, double R, EstimatorMode mode,
                                      const RewardEstimate& previous = {}) {
  return estimate_reward(tally_slot(outcomes), R, mode, previous);
}

/// What decode feedback SU-U users see after each slot.
enum class FeedbackScope {
  AllBlocks,  // BS broadcasts per-action decode counts aggregated over all M blocks
  OwnBlock,   // users only learn the ACK/NACK outcomes of their own resource block
};

enum class PayoffSource {
  Estimated,  // from simulated ACK/NACK outcomes and realized costs
  Exact,      // analytic u1(i, x); no simulation
};

struct AdaptiveConfig {
  SimConfig sim;
  BlockSchedule schedule;
  double mu = 0.5;
  State x0 = State::barycenter();
  EstimatorMode estimator = EstimatorMode::Conditional;
  PayoffSource source = PayoffSource::Estimated;
  bool fairness_scaling = false;
  FeedbackScope feedback = FeedbackScope::AllBlocks;  // SU-U only
  // Per-user state snapshots every this many blocks (SU-U); 0 keeps only the final states.
  std::size_t user_snapshot_stride = 0;

  void validate() const {
    sim.validate();
    schedule.validate();
    if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  }
};

struct AdaptiveTrajectory {
  std::vector<State> states;  // states[0] = x0, states[b] after block b
  std::vector<double> cost_scale;                   // c[b], b = 1..n
  std::vector<std::array<double, 2>> est_payoff;    // estimated u(1), u(2) in block b
  std::vector<double> dispersion;                   // SU-U: mean max-norm distance of users to the mean
  bool collapsed = false;
  std::size_t collapse_block = 0;
  double step_size = 0.0;

  // SU-U only.
  std::vector<State> final_user_states;
  std::vector<std::size_t> snapshot_blocks;
  std::vector<std::vector<State>> user_snapshots;
};

namespace detail {

// One protocol block: M blocks x 2 users x B slots.
struct BlockObservation {
  std::vector<SlotTally> slots;                 // B, summed over blocks
  std::vector<SlotTally> per_rb;                // M x B, row-major by block
  std::vector<std::array<double, 2>> cost_sum;  // per user, over own action-i slots
  std::vector<std::array<std::uint32_t, 2>> cost_count;
};

inline BlockObservation observe_block(const SimConfig& cfg, const PowerLevels& levels,
                                      std::span<const UserPolicy> users, std::span<const double> user_c,
                                      std::size_t block_index, std::size_t B) {
  const std::size_t M = cfg.blocks;
  BlockObservation obs;
  obs.cost_sum.assign(2 * M, {0.0, 0.0});
  obs.cost_count.assign(2 * M, {0, 0});
  auto& per_rb = obs.per_rb;
  per_rb.assign(M * B, SlotTally{});
  parallel_for_ranges(M, cfg.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      for (std::size_t t = 0; t < B; ++t) {
        const std::uint64_t slot = static_cast<std::uint64_t>(block_index) * B + t;
        std::array<UserOutcome, 2> uo;
        for (std::size_t j = 0; j < 2; ++j) {
          uo[j] = draw_user(cfg, SimMode::ChannelDriven, users[2 * m + j], levels, slot, m, j);
        }
        const auto [s1, s2] = decode_block(uo[0].action, uo[1].action);
        uo[0].success = s1;
        uo[1].success = s2;
        auto& tally = per_rb[m * B + t];
        tally.blocks = 1;
        for (std::size_t j = 0; j < 2; ++j) {
          const std::size_t ai = index_of(uo[j].action);
          if (ai == 2) continue;
          ++tally.attempts[ai];
          tally.successes[ai] += uo[j].success ? 1 : 0;
          const std::size_t k = 2 * m + j;
          obs.cost_sum[k][ai] += user_c[k] * uo[j].power;
          ++obs.cost_count[k][ai];
        }
      }
    }
  });
  obs.slots.assign(B, SlotTally{});
  for (std::size_t t = 0; t < B; ++t) {
    auto& s = obs.slots[t];
    s.blocks = M;
    for (std::size_t m = 0; m < M; ++m) {
      const auto& r = per_rb[m * B + t];
      for (std::size_t i = 0; i < 2; ++i) {
        s.attempts[i] += r.attempts[i];
        s.successes[i] += r.successes[i];
      }
    }
  }
  return obs;
}

// Time-averaged reward estimates over the block's slots. Slots without an
// estimate are skipped; a block without any keeps `carry`.
// Conditional mode weights the slots by their attempts: a per-slot ratio over
// M blocks is biased by O(1/M) (two same-level attempts in one block both
// fail), and plain averaging over slots never removes that.
inline RewardEstimate block_rewards(std::span<const SlotTally> slots, double R, EstimatorMode mode,
                                    RewardEstimate& carry) {
  if (mode == EstimatorMode::Conditional) {
    SlotTally pooled;
    for (const auto& s : slots) {
      pooled.blocks += s.blocks;
      for (std::size_t i = 0; i < 2; ++i) {
        pooled.attempts[i] += s.attempts[i];
        pooled.successes[i] += s.successes[i];
      }
    }
    carry = estimate_reward(pooled, R, mode, carry);
    return carry;
  }
  std::array<double, 2> sum{0.0, 0.0};
  std::array<std::size_t, 2> n{0, 0};
  RewardEstimate prev = carry;
  for (const auto& s : slots) {
    prev = estimate_reward(s, R, mode, prev);
    if (!std::isnan(prev.R1)) { sum[0] += prev.R1; ++n[0]; }
    if (!std::isnan(prev.R2)) { sum[1] += prev.R2; ++n[1]; }
  }
  RewardEstimate out;
  out.R1 = n[0] ? sum[0] / n[0] : carry.R1;
  out.R2 = n[1] ? sum[1] / n[1] : carry.R2;
  carry = prev;
  return out;
}

// Actions whose payoff is still unknown receive the share-weighted mean of
// the known ones, so their drift is zero.
inline ActionPayoffs fill_unknown(const State& x, ActionPayoffs u) {
  double w = 0.0, s = 0.0;
  bool any_unknown = false;
  for (std::size_t i = 0; i < 3; ++i) {
    if (std::isnan(u[i])) {
      any_unknown = true;
    } else {
      w += x.probs()[i];
      s += x.probs()[i] * u[i];
    }
  }
  if (!any_unknown) return u;
  const double mean = w > 0.0 ? s / w : 0.0;
  for (double& v : u)
    if (std::isnan(v)) v = mean;
  return u;
}

inline State mean_state(std::span<const State> xs) {
  std::array<double, 3> m{0.0, 0.0, 0.0};
  for (const auto& x : xs)
    for (std::size_t i = 0; i < 3; ++i) m[i] += x.probs()[i];
  for (double& v : m) v /= static_cast<double>(xs.size());
  const double s = m[0] + m[1] + m[2];
  for (double& v : m) v /= s;
  return State(m);
}

inline bool has_extinct(const State& x) { return x.x1() == 0.0 || x.x2() == 0.0 || x.x3() == 0.0; }

}  // namespace detail

/// State updating at the base station: one shared state, rewards estimated
/// from decode outcomes, costs from per-user block reports.
class SuBsProtocol {
 public:
  SuBsProtocol(AdaptiveConfig cfg, GameParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    params_.validate();
    const std::size_t K = cfg_.sim.users();
    user_snr_.resize(K);
    for (std::size_t k = 0; k < K; ++k) user_snr_[k] = cfg_.sim.user_avg_snr(k, params_.avg_snr);
    last_report_.assign(K, {kUnknown, kUnknown});
  }

  /// Payoff estimates for actions 1, 2, 3 from simulating one protocol block
  /// (0-based index) at the given state and cost scale.
  ActionPayoffs estimate(const State& x, double c, std::size_t block_index) {
    const std::size_t K = cfg_.sim.users();
    std::vector<UserPolicy> users;
    users.reserve(K);
    std::vector<double> user_c(K);
    for (std::size_t k = 0; k < K; ++k) {
      users.push_back(resolve_policy(x, user_snr_[k]));
      user_c[k] = cfg_.fairness_scaling ? fairness_scale(user_snr_[k], c, params_.avg_snr) : c;
    }
    const auto obs = detail::observe_block(cfg_.sim, {params_.rho1, params_.rho2}, users, user_c,
                                           block_index, cfg_.schedule.slots_per_block);
    const auto rew = detail::block_rewards(obs.slots, params_.reward, cfg_.estimator, reward_carry_);
    std::array<double, 2> sum{0.0, 0.0};
    std::array<std::size_t, 2> n{0, 0};
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < 2; ++i) {
        if (obs.cost_count[k][i] > 0) last_report_[k][i] = obs.cost_sum[k][i] / obs.cost_count[k][i];
        if (!std::isnan(last_report_[k][i])) {
          sum[i] += last_report_[k][i];
          ++n[i];
        }
      }
    }
    const double C1 = n[0] ? sum[0] / n[0] : kUnknown;
    const double C2 = n[1] ? sum[1] / n[1] : kUnknown;
    return {rew.R1 - C1, rew.R2 - C2, -params_.silent_cost()};
  }

  AdaptiveTrajectory run() {
    const auto& sched = cfg_.schedule;
    AdaptiveTrajectory tr;
    tr.step_size = cfg_.mu;
    State x = cfg_.x0;
    tr.states.push_back(x);
    for (std::size_t b = 1; b <= sched.num_blocks; ++b) {
      const double c = sched.c_at(b);
      ActionPayoffs u;
      if (cfg_.source == PayoffSource::Exact) {
        u = analytic_payoffs(x, params_.with_cost_scale(c));
      } else {
        u = estimate(x, c, b - 1);
      }
      tr.cost_scale.push_back(c);
      tr.est_payoff.push_back({u[0], u[1]});
      x = replicator_update(x, detail::fill_unknown(x, u), cfg_.mu);
      tr.states.push_back(x);
      if (!tr.collapsed && detail::has_extinct(x)) {
        tr.collapsed = true;
        tr.collapse_block = b;
      }
    }
    return tr;
  }

 private:
  AdaptiveConfig cfg_;
  GameParams params_;
  std::vector<double> user_snr_;
  std::vector<std::array<double, 2>> last_report_;
  RewardEstimate reward_carry_;
};

/// State updating at users: every user keeps its own state and updates it
/// from decode feedback (all blocks or only its own, see FeedbackScope) and
/// its own realized costs.
class SuUProtocol {
 public:
  SuUProtocol(AdaptiveConfig cfg, GameParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    params_.validate();
    const std::size_t K = cfg_.sim.users();
    user_snr_.resize(K);
    for (std::size_t k = 0; k < K; ++k) user_snr_[k] = cfg_.sim.user_avg_snr(k, params_.avg_snr);
    last_cost_.assign(K, {kUnknown, kUnknown});
  }

  AdaptiveTrajectory run() {
    const auto& sched = cfg_.schedule;
    const std::size_t K = cfg_.sim.users();
    std::vector<State> xs(K, cfg_.x0);
    AdaptiveTrajectory tr;
    tr.step_size = cfg_.mu;
    tr.states.push_back(detail::mean_state(xs));
    snapshot(tr, xs, 0);
    std::vector<UserPolicy> users(K, UserPolicy{cfg_.x0, {}, 1.0});
    std::vector<double> user_c(K);
    const std::size_t M = cfg_.sim.blocks;
    const std::size_t B = sched.slots_per_block;
    const bool own_block = cfg_.feedback == FeedbackScope::OwnBlock;
    std::vector<RewardEstimate> carry(own_block ? M : 1);
    std::vector<RewardEstimate> rew(carry.size());
    for (std::size_t b = 1; b <= sched.num_blocks; ++b) {
      const double c = sched.c_at(b);
      for (std::size_t k = 0; k < K; ++k) {
        user_c[k] = cfg_.fairness_scaling ? fairness_scale(user_snr_[k], c, params_.avg_snr) : c;
      }
      std::array<double, 2> payoff_sum{0.0, 0.0};
      if (cfg_.source == PayoffSource::Exact) {
        for (std::size_t k = 0; k < K; ++k) {
          const auto pk = params_.with_avg_snr(user_snr_[k]).with_cost_scale(user_c[k]);
          const auto u = analytic_payoffs(xs[k], pk);
          payoff_sum[0] += u[0];
          payoff_sum[1] += u[1];
          xs[k] = replicator_update(xs[k], u, cfg_.mu);
        }
      } else {
        for (std::size_t k = 0; k < K; ++k) users[k] = resolve_policy(xs[k], user_snr_[k]);
        const auto obs = detail::observe_block(cfg_.sim, {params_.rho1, params_.rho2}, users, user_c, b - 1,
                                               sched.slots_per_block);
        if (own_block) {
          for (std::size_t m = 0; m < M; ++m) {
            const std::span<const SlotTally> mine(obs.per_rb.data() + m * B, B);
            rew[m] = detail::block_rewards(mine, params_.reward, cfg_.estimator, carry[m]);
          }
        } else {
          rew[0] = detail::block_rewards(obs.slots, params_.reward, cfg_.estimator, carry[0]);
        }
        for (std::size_t k = 0; k < K; ++k) {
          const auto& r = rew[own_block ? k / 2 : 0];
          for (std::size_t i = 0; i < 2; ++i) {
            if (obs.cost_count[k][i] > 0) last_cost_[k][i] = obs.cost_sum[k][i] / obs.cost_count[k][i];
          }
          ActionPayoffs u{r.R1 - last_cost_[k][0], r.R2 - last_cost_[k][1], -params_.silent_cost()};
          u = detail::fill_unknown(xs[k], u);
          payoff_sum[0] += u[0];
          payoff_sum[1] += u[1];
          xs[k] = replicator_update(xs[k], u, cfg_.mu);
        }
      }
      const State mean = detail::mean_state(xs);
      double disp = 0.0;
      for (const auto& x : xs) disp += max_abs_diff(x, mean);
      tr.dispersion.push_back(disp / static_cast<double>(K));
      tr.cost_scale.push_back(c);
      tr.est_payoff.push_back({payoff_sum[0] / K, payoff_sum[1] / K});
      tr.states.push_back(mean);
      if (!tr.collapsed && detail::has_extinct(mean)) {
        tr.collapsed = true;
        tr.collapse_block = b;
      }
      if (cfg_.user_snapshot_stride && b % cfg_.user_snapshot_stride == 0) snapshot(tr, xs, b);
    }
    tr.final_user_states = xs;
    return tr;
  }

 private:
  void snapshot(AdaptiveTrajectory& tr, const std::vector<State>& xs, std::size_t b) const {
    if (!cfg_.user_snapshot_stride) return;
    tr.snapshot_blocks.push_back(b);
    tr.user_snapshots.push_back(xs);
  }

  AdaptiveConfig cfg_;
  GameParams params_;
  std::vector<double> user_snr_;
  std::vector<std::array<double, 2>> last_cost_;
};

inline AdaptiveTrajectory su_bs_run(const AdaptiveConfig& cfg, const GameParams& params) {
  return SuBsProtocol(cfg, params).run();
}

inline AdaptiveTrajectory su_u_run(const AdaptiveConfig& cfg, const GameParams& params) {
  return SuUProtocol(cfg, params).run();
}

/// ESS of the exact game at every block's cost scale (the tracking target).
inline std::vector<State> ess_path(const BlockSchedule& sched, const GameParams& params) {
  std::vector<State> out;
  out.reserve(sched.num_blocks);
  for (std::size_t b = 1; b <= sched.num_blocks; ++b) {
    out.push_back(solve_snr_cost(params.with_cost_scale(sched.c_at(b))).state);
  }
  return out;
}

/// Mean absolute coordinate error between states[b] (after block b) and the
/// ESS at c[b], averaged over blocks and coordinates.
inline double tracking_error(const AdaptiveTrajectory& tr, std::span<const State> target) {
  if (tr.states.size() != target.size() + 1) throw std::invalid_argument("trajectory/target length mismatch");
  double s = 0.0;
  for (std::size_t b = 0; b < target.size(); ++b) {
    for (std::size_t i = 0; i < 3; ++i) s += std::abs(tr.states[b + 1].probs()[i] - target[b].probs()[i]);
  }
  return s / (3.0 * static_cast<double>(target.size()));
}

}  // namespace hnoma

#endif  // HNOMA_ADAPTIVE_HPP
