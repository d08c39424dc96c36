#ifndef HNOMA_NOMA_SIM_HPP
#define HNOMA_NOMA_SIM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "hnoma/game.hpp"
#include "hnoma/parallel.hpp"
#include "hnoma/rng.hpp"
#include "hnoma/special_math.hpp"

namespace hnoma {

struct ActionDecision {
  Action action;
  double power;  // linear, relative to noise; 0 for silence
};

/// Truncated channel inversion with two target receive levels.
/// gamma == tau is silent, gamma == tau_pn uses the low level.
inline ActionDecision decide_action(double snr, const Thresholds& t, const PowerLevels& levels) {
  if (snr > t.tau_pn) return {Action::High, levels.rho1 / snr};
  if (snr > t.tau) return {Action::Low, levels.rho2 / snr};
  return {Action::Silent, 0.0};
}

/// SIC decode outcome for the two users of one block. Different non-zero
/// levels both decode; equal levels collide; a lone transmitter always decodes.
inline std::pair<bool, bool> decode_block(Action a1, Action a2) {
  index_of(a1);
  index_of(a2);
  const bool tx1 = a1 != Action::Silent;
  const bool tx2 = a2 != Action::Silent;
  if (tx1 && tx2) {
    const bool ok = a1 != a2;
    return {ok, ok};
  }
  return {tx1, tx2};
}

struct BandwidthEfficiency {
  double oma;
  double hybrid;
};

/// Users served per unit bandwidth times channel usage, for OMA and for two
/// users per block with Bernoulli(alpha) traffic and equiprobable levels.
inline BandwidthEfficiency efficiency(double blocks, double bandwidth, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("alpha must lie in (0, 1]");
  if (!(blocks > 0.0 && bandwidth > 0.0)) throw std::domain_error("M and F must be positive");
  const double eo = alpha * blocks / bandwidth;
  const double eh = (2.0 * alpha * (1.0 - alpha) + 0.5 * alpha * alpha) * 2.0 * blocks / bandwidth;
  return {eo, eh};
}

enum class SimMode { StateDriven, ChannelDriven };

struct SimConfig {
  std::size_t blocks = 100;   // M resource blocks, two users each
  std::size_t slots = 1000;
  std::vector<double> avg_snr;  // empty: use GameParams; size 1 or 2M
  SimMode mode = SimMode::ChannelDriven;
  std::uint64_t seed = 1;
  double packet_prob = 1.0;
  std::size_t workers = 1;
  bool trace = false;
  // Every user of every block draws from one shared stream (symmetry tests).
  bool identical_user_streams = false;

  std::size_t users() const { return 2 * blocks; }

  void validate() const {
    if (blocks < 1) throw std::invalid_argument("need at least one resource block");
    if (!(packet_prob > 0.0 && packet_prob <= 1.0)) {
      throw std::invalid_argument("packet probability must lie in (0, 1]");
    }
    if (!avg_snr.empty() && avg_snr.size() != 1 && avg_snr.size() != users()) {
      throw std::invalid_argument("avg_snr must have 1 or 2M entries");
    }
    for (double g : avg_snr) {
      if (!(g > 0.0)) throw std::invalid_argument("average SNR must be positive");
    }
  }

  double user_avg_snr(std::size_t user, double fallback) const {
    if (avg_snr.empty()) return fallback;
    return avg_snr.size() == 1 ? avg_snr[0] : avg_snr[user];
  }

  StreamKey key(StreamPurpose purpose, std::uint64_t slot, std::size_t block, std::size_t j) const {
    if (identical_user_streams) return {seed, purpose, slot, 0, 0};
    return {seed, purpose, slot, block, 2 * block + j};
  }
};

struct UserOutcome {
  Action action = Action::Silent;
  double snr = 0.0;
  double power = 0.0;
  bool success = false;
};

/// One block in one slot.
struct SlotOutcome {
  std::uint64_t slot = 0;
  std::size_t block = 0;
  std::array<UserOutcome, 2> users{};
  int decoded = 0;  // Y in {0, 1, 2}
};

struct RateEstimate {
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;

  double rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
  double std_error() const {
    if (!trials) return 0.0;
    const double p = rate();
    return std::sqrt(p * (1.0 - p) / trials);
  }
};

struct SimStats {
  std::size_t blocks = 0;
  std::size_t slots = 0;
  std::uint64_t seed = 0;
  double throughput_per_user = 0.0;  // successes per user per slot
  double throughput_se = 0.0;
  std::array<std::uint64_t, 3> action_counts{};
  std::array<double, 3> action_frequency{};
  std::array<RateEstimate, 2> success_by_action{};  // actions 1 and 2
  std::array<double, 2> mean_power{};               // actions 1 and 2
  std::array<double, 2> mean_power_se{};
  double max_power = 0.0;
  std::array<std::uint64_t, 3> decoded_histogram{};  // count of Y = 0, 1, 2
  std::vector<std::uint64_t> block_successes;
  bool unbounded_power_risk = false;
  std::vector<SlotOutcome> trace;  // slot-major, then block
};

using Policy = std::variant<Thresholds, State>;

namespace detail {

struct BlockAccum {
  std::array<std::uint64_t, 3> actions{};
  std::array<std::uint64_t, 2> attempts{};
  std::array<std::uint64_t, 2> successes{};
  std::array<double, 2> power_sum{};
  std::array<double, 2> power_sq_sum{};
  double max_power = 0.0;
  std::array<std::uint64_t, 3> y_hist{};
  std::uint64_t y_sum = 0;
  std::uint64_t y_sq_sum = 0;
  std::vector<SlotOutcome> trace;
};

// Region (lo, hi] of the SNR axis that maps to an action.
inline std::pair<double, double> action_region(Action a, const Thresholds& t) {
  switch (a) {
    case Action::High: return {t.tau_pn, kInf};
    case Action::Low: return {t.tau, t.tau_pn};
    case Action::Silent: return {0.0, t.tau};
  }
  return {0.0, 0.0};
}

inline Action sample_action(const State& x, double u) {
  if (u < x.x1()) return Action::High;
  if (u < x.x1() + x.x2()) return Action::Low;
  return Action::Silent;
}

}  // namespace detail

/// Per-user policy inputs resolved for the simulation mode.
struct UserPolicy {
  State state;
  Thresholds thresholds;
  double avg_snr;
};

inline UserPolicy resolve_policy(const Policy& policy, double avg_snr) {
  if (const auto* x = std::get_if<State>(&policy)) {
    return {*x, thresholds_from_state(*x, avg_snr), avg_snr};
  }
  const auto& t = std::get<Thresholds>(policy);
  t.validate();
  return {state_from_thresholds(t, avg_snr), t, avg_snr};
}

/// Simulates one user in one slot: traffic, action and SNR draws, power.
inline UserOutcome draw_user(const SimConfig& cfg, SimMode mode, const UserPolicy& up,
                             const PowerLevels& levels, std::uint64_t slot, std::size_t block,
                             std::size_t j) {
  UserOutcome o;
  bool has_packet = true;
  if (cfg.packet_prob < 1.0) {
    CounterStream traffic(cfg.key(StreamPurpose::Traffic, slot, block, j));
    has_packet = traffic.uniform() < cfg.packet_prob;
  }
  CounterStream ch(cfg.key(StreamPurpose::Channel, slot, block, j));
  if (mode == SimMode::ChannelDriven) {
    o.snr = sample_snr(up.avg_snr, ch);
    const auto d = decide_action(o.snr, up.thresholds, levels);
    o.action = d.action;
    o.power = d.power;
  } else {
    CounterStream act(cfg.key(StreamPurpose::Action, slot, block, j));
    o.action = detail::sample_action(up.state, act.uniform());
    const auto [lo, hi] = detail::action_region(o.action, up.thresholds);
    o.snr = sample_snr_between(up.avg_snr, lo, hi, ch);
    o.power = o.action == Action::High  ? levels.rho1 / o.snr
              : o.action == Action::Low ? levels.rho2 / o.snr
                                        : 0.0;
  }
  if (!has_packet) {
    o.action = Action::Silent;
    o.power = 0.0;
  }
  return o;
}

/// Slot-level Monte-Carlo run of M blocks x 2 users. Blocks are split across
/// workers; per-block tallies are reduced in block order so the result is
/// independent of the worker count.
inline SimStats run_sim(const SimConfig& cfg, const Policy& policy, const GameParams& params) {
  cfg.validate();
  params.validate();
  const PowerLevels levels{params.rho1, params.rho2};
  std::vector<UserPolicy> users;
  users.reserve(cfg.users());
  for (std::size_t k = 0; k < cfg.users(); ++k) {
    users.push_back(resolve_policy(policy, cfg.user_avg_snr(k, params.avg_snr)));
  }

  std::vector<detail::BlockAccum> acc(cfg.blocks);
  parallel_for_ranges(cfg.blocks, cfg.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      auto& a = acc[m];
      if (cfg.trace) a.trace.reserve(cfg.slots);
      for (std::uint64_t t = 0; t < cfg.slots; ++t) {
        SlotOutcome so;
        so.slot = t;
        so.block = m;
        for (std::size_t j = 0; j < 2; ++j) {
          so.users[j] = draw_user(cfg, cfg.mode, users[2 * m + j], levels, t, m, j);
        }
        const auto [s1, s2] = decode_block(so.users[0].action, so.users[1].action);
        so.users[0].success = s1;
        so.users[1].success = s2;
        so.decoded = int(s1) + int(s2);
        for (const auto& u : so.users) {
          const std::size_t ai = index_of(u.action);
          ++a.actions[ai];
          if (ai < 2) {
            ++a.attempts[ai];
            a.successes[ai] += u.success ? 1 : 0;
            a.power_sum[ai] += u.power;
            a.power_sq_sum[ai] += u.power * u.power;
            a.max_power = std::max(a.max_power, u.power);
          }
        }
        ++a.y_hist[static_cast<std::size_t>(so.decoded)];
        a.y_sum += static_cast<std::uint64_t>(so.decoded);
        a.y_sq_sum += static_cast<std::uint64_t>(so.decoded * so.decoded);
        if (cfg.trace) a.trace.push_back(so);
      }
    }
  });

  SimStats st;
  st.blocks = cfg.blocks;
  st.slots = cfg.slots;
  st.seed = cfg.seed;
  std::uint64_t y_sum = 0, y_sq = 0;
  std::array<double, 2> psum{}, psq{};
  st.block_successes.resize(cfg.blocks);
  for (std::size_t m = 0; m < cfg.blocks; ++m) {
    const auto& a = acc[m];
    for (std::size_t i = 0; i < 3; ++i) {
      st.action_counts[i] += a.actions[i];
      st.decoded_histogram[i] += a.y_hist[i];
    }
    for (std::size_t i = 0; i < 2; ++i) {
      st.success_by_action[i].trials += a.attempts[i];
      st.success_by_action[i].successes += a.successes[i];
      psum[i] += a.power_sum[i];
      psq[i] += a.power_sq_sum[i];
    }
    st.max_power = std::max(st.max_power, a.max_power);
    y_sum += a.y_sum;
    y_sq += a.y_sq_sum;
    st.block_successes[m] = a.y_sum;
  }
  const double n_bs = static_cast<double>(cfg.blocks) * static_cast<double>(cfg.slots);
  const double n_us = 2.0 * n_bs;
  if (n_bs > 0) {
    const double mean_y = static_cast<double>(y_sum) / n_bs;
    const double var_y = std::max(0.0, static_cast<double>(y_sq) / n_bs - mean_y * mean_y);
    st.throughput_per_user = mean_y / 2.0;
    st.throughput_se = std::sqrt(var_y / n_bs) / 2.0;
    for (std::size_t i = 0; i < 3; ++i) st.action_frequency[i] = st.action_counts[i] / n_us;
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const double n = static_cast<double>(st.success_by_action[i].trials);
    if (n > 0) {
      st.mean_power[i] = psum[i] / n;
      const double var = std::max(0.0, psq[i] / n - st.mean_power[i] * st.mean_power[i]);
      st.mean_power_se[i] = std::sqrt(var / n);
    }
  }
  for (const auto& u : users) {
    if (u.thresholds.tau <= 0.0 && u.state.x3() < 1.0) st.unbounded_power_risk = true;
  }
  if (cfg.trace) {
    st.trace.reserve(static_cast<std::size_t>(n_bs));
    for (std::uint64_t t = 0; t < cfg.slots; ++t)
      for (std::size_t m = 0; m < cfg.blocks; ++m) st.trace.push_back(acc[m].trace[t]);
  }
  return st;
}

}  // namespace hnoma

#endif  // HNOMA_NOMA_SIM_HPP
