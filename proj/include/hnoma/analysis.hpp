#ifndef HNOMA_ANALYSIS_HPP
#define HNOMA_ANALYSIS_HPP

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "hnoma/ess_solver.hpp"
#include "hnoma/game.hpp"
#include "hnoma/parallel.hpp"

namespace hnoma {

/// Per-user throughput of hybrid uplink NOMA at state x:
/// (1 - x1) x1 + (1 - x2) x2.
inline double throughput_hnoma(const State& x) {
  return (1.0 - x.x1()) * x.x1() + (1.0 - x.x2()) * x.x2();
}

/// Two users time-sharing one block (TDMA) when each is silent w.p. delta.
inline double throughput_oma(double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::domain_error("delta must lie in [0, 1]");
  return (1.0 - delta) / 2.0;
}

struct OptimalThroughput {
  double value;
  State argmax;
  double ratio_to_oma;  // 1 + delta, kept at its limit 2 when both vanish at delta = 1
};

/// max of the hybrid NOMA throughput subject to x1 + x2 <= 1 - delta.
inline OptimalThroughput throughput_hnoma_opt(double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::domain_error("delta must lie in [0, 1]");
  const double h = (1.0 - delta) / 2.0;
  const double value = (1.0 - delta * delta) / 2.0;
  return {value, State(h, h, delta), 1.0 + delta};
}

struct GridOptimum {
  double value;
  State argmax;
};

/// Brute-force maximum of the throughput over the n x n grid on [0, 1]^2
/// restricted to x1 + x2 <= 1 - delta.
inline GridOptimum throughput_grid_max(double delta, std::size_t n) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::domain_error("delta must lie in [0, 1]");
  if (n < 2) throw std::invalid_argument("grid needs at least 2 points per axis");
  const double h = 1.0 / static_cast<double>(n - 1);
  const double budget = 1.0 - delta + 1e-12;
  GridOptimum best{-kInf, State::vertex(Action::Silent)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = h * static_cast<double>(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double x2 = h * static_cast<double>(j);
      if (x1 + x2 > budget) break;
      const double v = (1.0 - x1) * x1 + (1.0 - x2) * x2;
      if (v > best.value) best = {v, State(x1, x2, std::max(0.0, 1.0 - x1 - x2))};
    }
  }
  return best;
}

enum class SweepAxis { CostScale, AvgSnr };

inline const char* to_string(SweepAxis a) { return a == SweepAxis::CostScale ? "c" : "gbar"; }

struct SweepRow {
  double value;
  EssSolution ess;
  double eta_hnoma;
  double eta_tdma;
  double ratio;  // eta_hnoma / eta_tdma
};

struct Crossover {
  double at;        // axis value where x1* - x2* changes sign (linear interpolation)
  double share;     // interpolated x1* (= x2*) there
};

struct SweepTable {
  SweepAxis axis;
  std::vector<SweepRow> rows;
  std::vector<Crossover> crossovers;
  std::optional<std::size_t> closest_row;  // row with minimal |x1* - x2*|
};

/// Memoizes ESS solutions keyed by (R, Gamma, gbar, c).
class SweepCache {
 public:
  using Key = std::tuple<double, double, double, double>;

  static Key key_of(const GameParams& p) {
    return std::make_tuple(p.reward, p.sinr_threshold, p.avg_snr, p.cost_scale());
  }

  const EssSolution& solve(const GameParams& p) {
    auto it = cache_.find(key_of(p));
    if (it == cache_.end()) it = cache_.emplace(key_of(p), solve_snr_cost(p)).first;
    return it->second;
  }
  bool contains(const GameParams& p) const { return cache_.count(key_of(p)) > 0; }
  void insert(const GameParams& p, EssSolution s) { cache_.emplace(key_of(p), std::move(s)); }
  std::size_t size() const { return cache_.size(); }

 private:
  std::map<Key, EssSolution> cache_;
};

inline std::vector<Crossover> find_crossovers(const std::vector<SweepRow>& rows) {
  std::vector<Crossover> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& a = rows[i - 1];
    const auto& b = rows[i];
    if (!a.ess.valid || !b.ess.valid) continue;
    const double da = a.ess.state.x1() - a.ess.state.x2();
    const double db = b.ess.state.x1() - b.ess.state.x2();
    if (da == 0.0) {
      out.push_back({a.value, a.ess.state.x1()});
    } else if (da * db < 0.0) {
      const double w = da / (da - db);
      const double at = a.value + w * (b.value - a.value);
      const double share = a.ess.state.x1() + w * (b.ess.state.x1() - a.ess.state.x1());
      out.push_back({at, share});
    }
  }
  return out;
}

/// ESS and throughput along one parameter axis. Unsolvable points stay in
/// the table with an invalid flag. Uncached points are solved on up to
/// `workers` threads; the table is assembled in axis order either way.
inline SweepTable sweep(const GameParams& base, SweepAxis axis, const std::vector<double>& values,
                        SweepCache* cache = nullptr, std::size_t workers = 1) {
  SweepCache local;
  SweepCache& c = cache ? *cache : local;
  const auto point = [&](double v) {
    return axis == SweepAxis::CostScale ? base.with_cost_scale(v) : base.with_avg_snr(v);
  };
  const auto solve_point = [&](double v) {
    EssSolution s;
    try {
      s = solve_snr_cost(point(v));
    } catch (const std::exception& e) {
      s.valid = false;
      s.reason = e.what();
    }
    return s;
  };

  std::vector<std::optional<EssSolution>> fresh(values.size());
  parallel_for_ranges(values.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      bool cached = false;
      try {
        cached = c.contains(point(values[i]));
      } catch (const std::exception&) {
        // solve_point reports the error
      }
      if (!cached) fresh[i] = solve_point(values[i]);
    }
  });

  SweepTable t;
  t.axis = axis;
  double best_gap = kInf;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    SweepRow row{v, {}, 0.0, 0.0, 0.0};
    if (fresh[i]) {
      row.ess = *fresh[i];
      try {
        c.insert(point(v), row.ess);
      } catch (const std::exception&) {
        // the axis value itself is out of range; nothing to cache
      }
    } else {
      row.ess = c.solve(point(v));
    }
    row.eta_hnoma = throughput_hnoma(row.ess.state);
    row.eta_tdma = throughput_oma(row.ess.state.x3());
    row.ratio = row.eta_tdma > 0.0 ? row.eta_hnoma / row.eta_tdma : kInf;
    if (row.ess.valid) {
      const double gap = std::abs(row.ess.state.x1() - row.ess.state.x2());
      if (gap < best_gap) {
        best_gap = gap;
        t.closest_row = t.rows.size();
      }
    }
    t.rows.push_back(std::move(row));
  }
  t.crossovers = find_crossovers(t.rows);
  return t;
}

inline std::vector<double> linspace_step(double from, double to, double step) {
  if (!(step > 0.0) || to < from) throw std::invalid_argument("bad sweep range");
  std::vector<double> v;
  const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) v.push_back(from + step * static_cast<double>(i));
  return v;
}

}  // namespace hnoma

#endif  // HNOMA_ANALYSIS_HPP
