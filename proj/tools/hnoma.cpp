// hnoma: command-line driver for the hybrid uplink NOMA game.
//
//   hnoma --config run.json [--seed N] [--workers N] [--out DIR] [--format csv|json] <command>
//
// Commands: ess, replicator, simulate, adaptive [su-bs|su-u], sweep, throughput.
// Exit codes: 0 ok, 1 usage/config/output error, 2 invalid mathematical solution.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hnoma/hnoma.hpp"

#ifndef HNOMA_VERSION
#define HNOMA_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hnoma;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- config access

std::string join_path(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("'" + (where.empty() ? "<root>" : where) + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + join_path(where, k) + "'");
  }
}

double number(const json& obj, const std::string& key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing key '" + join_path(where, key) + "'");
  if (!it->is_number()) throw ConfigError("'" + join_path(where, key) + "' must be a number");
  return it->get<double>();
}

double number_or(const json& obj, const std::string& key, const std::string& where, double fallback) {
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

std::uint64_t count_or(const json& obj, const std::string& key, const std::string& where, std::uint64_t fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_unsigned()) {
    throw ConfigError("'" + join_path(where, key) + "' must be a non-negative integer");
  }
  return it->get<std::uint64_t>();
}

bool flag_or(const json& obj, const std::string& key, const std::string& where, bool fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) throw ConfigError("'" + join_path(where, key) + "' must be true or false");
  return it->get<bool>();
}

std::string text_or(const json& obj, const std::string& key, const std::string& where, const std::string& fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) throw ConfigError("'" + join_path(where, key) + "' must be a string");
  return it->get<std::string>();
}

std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("'" + path + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError("'" + path + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

State state_value(const json& v, const std::string& path) {
  const auto xs = number_list(v, path);
  if (xs.size() != 3) throw ConfigError("'" + path + "' must have three entries");
  try {
    return State(xs[0], xs[1], xs[2]);
  } catch (const std::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Exactly one of <base>_db / <base>_linear; returns the linear value.
std::optional<double> unit_pair(const json& obj, const std::string& base, const std::string& where, bool required) {
  const bool has_db = obj.contains(base + "_db");
  const bool has_lin = obj.contains(base + "_linear");
  if (has_db && has_lin) {
    throw ConfigError("give only one of '" + join_path(where, base + "_db") + "' and '" +
                      join_path(where, base + "_linear") + "'");
  }
  if (has_db) return db_to_linear(number(obj, base + "_db", where));
  if (has_lin) return number(obj, base + "_linear", where);
  if (required) {
    throw ConfigError("missing '" + join_path(where, base + "_db") + "' or '" + join_path(where, base + "_linear") + "'");
  }
  return std::nullopt;
}

std::vector<double> unit_list(const json& obj, const std::string& base, const std::string& where) {
  const bool has_db = obj.contains(base + "_db");
  const bool has_lin = obj.contains(base + "_linear");
  if (has_db && has_lin) throw ConfigError("give only one of '" + base + "_db' and '" + base + "_linear'");
  if (has_db) {
    auto v = number_list(obj.at(base + "_db"), join_path(where, base + "_db"));
    for (double& g : v) g = db_to_linear(g);
    return v;
  }
  if (has_lin) return number_list(obj.at(base + "_linear"), join_path(where, base + "_linear"));
  return {};
}

const std::set<std::string> kTopKeys{"R",         "c",          "C1",        "C2",       "C3",
                                     "gamma_db",  "gamma_linear", "gbar_db", "gbar_linear", "seed",
                                     "workers",   "replicator", "simulate",  "adaptive", "sweep",
                                     "throughput"};

GameParams parse_game(const json& cfg) {
  const double R = number(cfg, "R", "");
  const double gamma = *unit_pair(cfg, "gamma", "", true);
  const double gbar = *unit_pair(cfg, "gbar", "", true);
  const bool scaled = cfg.contains("c");
  const bool fixed = cfg.contains("C1") || cfg.contains("C2");
  if (scaled == fixed) throw ConfigError("give either 'c' (SNR-scaled cost) or 'C1' and 'C2' (fixed cost)");
  const double C3 = number_or(cfg, "C3", "", 0.0);
  try {
    GameParams p = scaled ? GameParams::snr_scaled(R, number(cfg, "c", ""), gamma, gbar)
                          : GameParams::fixed(R, number(cfg, "C1", ""), number(cfg, "C2", ""), C3, gamma, gbar);
    if (scaled) p.cost = SnrScaledCost{p.cost_scale(), C3};
    p.validate();
    return p;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("game parameters: ") + e.what());
  }
}

json section(const json& cfg, const std::string& name) {
  return cfg.contains(name) ? cfg.at(name) : json::object();
}

// ---------------------------------------------------------------- output

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

json jnum(double v) {
  if (std::isfinite(v)) return v;
  return num(v);  // JSON has no inf/nan literals
}

json jstate(const State& x) { return json::array({x.x1(), x.x2(), x.x3()}); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Run {
  std::string command;
  json config;  // effective config, workers removed
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  fs::path out;
  bool csv = true;

  std::string hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
    return buf;
  }

  json meta() const {
    json m;
    m["tool"] = std::string("hnoma ") + HNOMA_VERSION;
    m["command"] = command;
    m["config_hash"] = hash();
    m["seed"] = seed ? json(*seed) : json(nullptr);
    return m;
  }

  std::string csv_header() const {
    std::ostringstream os;
    os << "# tool: hnoma " << HNOMA_VERSION << "\n";
    os << "# command: " << command << "\n";
    os << "# config_hash: " << hash() << "\n";
    os << "# seed: " << (seed ? std::to_string(*seed) : std::string("none")) << "\n";
    return os.str();
  }

  void write(const std::string& name, const std::string& body) const {
    const fs::path p = out / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw OutputError("cannot write " + p.string());
    f << body;
    if (!f) throw OutputError("write failed: " + p.string());
  }

  void write_json(const std::string& name, json body) const {
    json doc;
    doc["meta"] = meta();
    for (auto& [k, v] : body.items()) doc[k] = v;
    write(name, doc.dump(2) + "\n");
  }

  // Table as CSV (with comment header) or as JSON records, per --format.
  void write_table(const std::string& stem, const std::vector<std::string>& cols,
                   const std::vector<std::vector<std::string>>& rows) const {
    if (csv) {
      std::string s = csv_header();
      for (std::size_t i = 0; i < cols.size(); ++i) s += (i ? "," : "") + cols[i];
      s += "\n";
      for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
        s += "\n";
      }
      write(stem + ".csv", s);
    } else {
      json recs = json::array();
      for (const auto& r : rows) {
        json o = json::object();
        for (std::size_t i = 0; i < cols.size(); ++i) o[cols[i]] = r[i];
        recs.push_back(o);
      }
      write_json(stem + ".json", json{{"columns", cols}, {"rows", recs}});
    }
  }
};

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw OutputError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".hnoma-write-probe";
  {
    std::ofstream f(probe, std::ios::trunc);
    if (!f) throw OutputError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

std::uint64_t require_seed(const Run& run) {
  if (!run.seed) throw ConfigError("'" + run.command + "' needs a seed (config key 'seed' or --seed)");
  return *run.seed;
}

// ---------------------------------------------------------------- commands

int cmd_ess(const Run& run) {
  check_keys(run.config, "", kTopKeys);
  const GameParams p = parse_game(run.config);
  prepare_out(run.out);
  const EssSolution s = solve_ess(p);

  const Thresholds th = thresholds_from_state(s.state, p.avg_snr);
  json r;
  r["state"] = jstate(s.state);
  r["regime"] = to_string(s.regime);
  r["valid"] = s.valid;
  r["reason"] = s.reason;
  r["warnings"] = s.warnings;
  r["residuals"] = json::array({jnum(s.residual1), jnum(s.residual2)});
  r["tau"] = jnum(th.tau);
  r["tau_pn"] = jnum(th.tau_pn);
  if (s.valid) {
    try {
      const auto A = payoff_matrix_at(s.state, p);
      r["payoff"] = jnum(mixed_payoff(s.state, s.state, A));
      r["nash"] = is_mixed_ne(s.state, A);
    } catch (const std::exception& e) {
      r["payoff_note"] = e.what();
    }
  }
  if (run.csv) {
    run.write_table("ess", {"x1", "x2", "x3", "regime", "valid", "tau", "tau_pn"},
                    {{num(s.state.x1()), num(s.state.x2()), num(s.state.x3()), to_string(s.regime),
                      s.valid ? "1" : "0", num(th.tau), num(th.tau_pn)}});
  }
  run.write_json("ess.json", r);

  std::printf("ESS (%s): x = (%.6f, %.6f, %.6f)%s\n", to_string(s.regime), s.state.x1(), s.state.x2(),
              s.state.x3(), s.valid ? "" : "  [invalid]");
  std::printf("thresholds: tau = %s, tau_pn = %s\n", num(th.tau).c_str(), num(th.tau_pn).c_str());
  for (const auto& w : s.warnings) std::printf("warning: %s\n", w.c_str());
  if (!s.valid) std::printf("invalid: %s\n", s.reason.c_str());
  return s.valid ? 0 : 2;
}

int cmd_replicator(const Run& run) {
  check_keys(run.config, "", kTopKeys);
  const json sec = section(run.config, "replicator");
  check_keys(sec, "replicator", {"x0", "mu", "max_iters", "drift_tol"});
  const GameParams p = parse_game(run.config);
  ReplicatorOptions opt;
  opt.mu = number_or(sec, "mu", "replicator", opt.mu);
  opt.max_iters = count_or(sec, "max_iters", "replicator", opt.max_iters);
  opt.drift_tol = number_or(sec, "drift_tol", "replicator", opt.drift_tol);
  const State x0 = sec.contains("x0") ? state_value(sec.at("x0"), "replicator.x0") : State::barycenter();
  if (!(opt.mu > 0.0)) throw ConfigError("'replicator.mu' must be positive");
  if (!x0.interior()) throw ConfigError("'replicator.x0' must be strictly interior");
  prepare_out(run.out);

  const Trajectory t = run_replicator(x0, p, opt);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(t.states.size());
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    const auto& x = t.states[k];
    rows.push_back({std::to_string(k), num(x.x1()), num(x.x2()), num(x.x3()), num(t.payoffs[k])});
  }
  run.write_table("trajectory", {"iter", "x1", "x2", "x3", "payoff"}, rows);

  json r;
  r["final_state"] = jstate(t.final_state());
  r["converged"] = t.converged;
  r["iterations"] = t.iterations;
  r["final_drift"] = jnum(t.final_drift);
  r["mu"] = opt.mu;
  const EssSolution s = solve_ess(p);
  if (s.valid) {
    r["ess"] = jstate(s.state);
    r["distance_to_ess"] = max_abs_diff(t.final_state(), s.state);
  }
  run.write_json("replicator.json", r);

  const auto& xf = t.final_state();
  std::printf("replicator: %s after %zu iterations, x = (%.6f, %.6f, %.6f)\n",
              t.converged ? "converged" : "stopped", t.iterations, xf.x1(), xf.x2(), xf.x3());
  return 0;
}

std::vector<double> per_user_snr(const json& sec, const std::string& where) {
  return unit_list(sec, "user_gbar", where);
}

int cmd_simulate(const Run& run) {
  check_keys(run.config, "", kTopKeys);
  const json sec = section(run.config, "simulate");
  check_keys(sec, "simulate", {"blocks", "slots", "mode", "policy", "packet_prob", "user_gbar_db",
                               "user_gbar_linear", "trace"});
  const GameParams p = parse_game(run.config);
  SimConfig cfg;
  cfg.seed = require_seed(run);
  cfg.workers = run.workers;
  cfg.blocks = count_or(sec, "blocks", "simulate", cfg.blocks);
  cfg.slots = count_or(sec, "slots", "simulate", cfg.slots);
  cfg.packet_prob = number_or(sec, "packet_prob", "simulate", 1.0);
  cfg.trace = flag_or(sec, "trace", "simulate", false);
  cfg.avg_snr = per_user_snr(sec, "simulate");
  const std::string mode = text_or(sec, "mode", "simulate", "channel");
  if (mode == "channel") {
    cfg.mode = SimMode::ChannelDriven;
  } else if (mode == "state") {
    cfg.mode = SimMode::StateDriven;
  } else {
    throw ConfigError("'simulate.mode' must be \"channel\" or \"state\"");
  }
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("simulate: ") + e.what());
  }

  Policy policy = State::barycenter();
  if (sec.contains("policy")) {
    const json& pol = sec.at("policy");
    check_keys(pol, "simulate.policy", {"state", "tau", "tau_pn"});
    if (pol.contains("state") == (pol.contains("tau") || pol.contains("tau_pn"))) {
      throw ConfigError("'simulate.policy' needs either 'state' or 'tau' and 'tau_pn'");
    }
    if (pol.contains("state")) {
      policy = state_value(pol.at("state"), "simulate.policy.state");
    } else {
      Thresholds t;
      t.tau = number(pol, "tau", "simulate.policy");
      t.tau_pn = pol.contains("tau_pn") && pol.at("tau_pn").is_null() ? kInf : number(pol, "tau_pn", "simulate.policy");
      try {
        t.validate();
      } catch (const std::exception& e) {
        throw ConfigError(std::string("simulate.policy: ") + e.what());
      }
      policy = t;
    }
  } else {
    const EssSolution s = solve_ess(p);
    if (!s.valid) {
      std::printf("invalid: no ESS to simulate (%s)\n", s.reason.c_str());
      return 2;
    }
    policy = s.state;
  }
  prepare_out(run.out);

  const SimStats st = run_sim(cfg, policy, p);
  const State x = resolve_policy(policy, p.avg_snr).state;

  json r;
  r["blocks"] = st.blocks;
  r["slots"] = st.slots;
  r["policy_state"] = jstate(x);
  r["throughput_per_user"] = st.throughput_per_user;
  r["throughput_se"] = st.throughput_se;
  r["throughput_analytic"] = throughput_hnoma(x);
  r["action_counts"] = st.action_counts;
  r["action_frequency"] = st.action_frequency;
  json sba = json::array();
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& e = st.success_by_action[i];
    sba.push_back({{"action", i + 1}, {"successes", e.successes}, {"trials", e.trials},
                   {"rate", e.rate()}, {"se", e.std_error()}});
  }
  r["success_by_action"] = sba;
  r["success_analytic"] = json::array({x.x2() + x.x3(), x.x1() + x.x3()});
  r["mean_power"] = json::array({jnum(st.mean_power[0]), jnum(st.mean_power[1])});
  r["mean_power_se"] = json::array({jnum(st.mean_power_se[0]), jnum(st.mean_power_se[1])});
  r["max_power"] = jnum(st.max_power);
  r["decoded_histogram"] = st.decoded_histogram;
  r["unbounded_power_risk"] = st.unbounded_power_risk;
  run.write_json("sim_stats.json", r);

  if (cfg.trace) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(st.trace.size() * 2);
    for (const auto& so : st.trace) {
      for (std::size_t j = 0; j < 2; ++j) {
        const auto& u = so.users[j];
        rows.push_back({std::to_string(so.slot), std::to_string(so.block), std::to_string(2 * so.block + j),
                        std::to_string(static_cast<int>(u.action)), num(u.snr), num(u.power),
                        u.success ? "1" : "0"});
      }
    }
    run.write_table("trace", {"slot", "block", "user", "action", "snr", "power", "success"}, rows);
  }

  std::printf("simulate: %zu blocks x %zu slots, throughput/user = %.6f (se %.2g), analytic %.6f\n", st.blocks,
              st.slots, st.throughput_per_user, st.throughput_se, throughput_hnoma(x));
  return 0;
}

int cmd_adaptive(const Run& run, const std::string& protocol_arg) {
  check_keys(run.config, "", kTopKeys);
  const json sec = section(run.config, "adaptive");
  check_keys(sec, "adaptive", {"protocol", "blocks", "slots_per_block", "num_blocks", "schedule", "mu", "x0",
                               "estimator", "payoffs", "feedback", "fairness_scaling", "user_gbar_db",
                               "user_gbar_linear", "user_snapshot_stride"});
  const GameParams p = parse_game(run.config);
  if (!std::holds_alternative<SnrScaledCost>(p.cost)) {
    throw ConfigError("'adaptive' needs the SNR-scaled cost model (config key 'c')");
  }
  const std::string protocol = protocol_arg.empty() ? text_or(sec, "protocol", "adaptive", "") : protocol_arg;
  if (protocol != "su-bs" && protocol != "su-u") {
    throw ConfigError("adaptive protocol must be \"su-bs\" or \"su-u\"");
  }

  AdaptiveConfig cfg;
  cfg.sim.seed = require_seed(run);
  cfg.sim.workers = run.workers;
  cfg.sim.blocks = count_or(sec, "blocks", "adaptive", 300);
  cfg.sim.avg_snr = per_user_snr(sec, "adaptive");
  cfg.mu = number_or(sec, "mu", "adaptive", cfg.mu);
  if (sec.contains("x0")) cfg.x0 = state_value(sec.at("x0"), "adaptive.x0");
  cfg.schedule.slots_per_block = count_or(sec, "slots_per_block", "adaptive", cfg.schedule.slots_per_block);
  cfg.schedule.num_blocks = count_or(sec, "num_blocks", "adaptive", cfg.schedule.num_blocks);
  cfg.schedule.slope = 0.0;
  cfg.schedule.offset = p.cost_scale();
  if (sec.contains("schedule")) {
    const json& sc = sec.at("schedule");
    check_keys(sc, "adaptive.schedule", {"slope", "offset"});
    cfg.schedule.slope = number_or(sc, "slope", "adaptive.schedule", 0.0);
    cfg.schedule.offset = number_or(sc, "offset", "adaptive.schedule", p.cost_scale());
  }
  const std::string est = text_or(sec, "estimator", "adaptive", "conditional");
  if (est == "conditional") {
    cfg.estimator = EstimatorMode::Conditional;
  } else if (est == "unconditional") {
    cfg.estimator = EstimatorMode::Unconditional;
  } else {
    throw ConfigError("'adaptive.estimator' must be \"conditional\" or \"unconditional\"");
  }
  const std::string src = text_or(sec, "payoffs", "adaptive", "estimated");
  if (src == "estimated") {
    cfg.source = PayoffSource::Estimated;
  } else if (src == "exact") {
    cfg.source = PayoffSource::Exact;
  } else {
    throw ConfigError("'adaptive.payoffs' must be \"estimated\" or \"exact\"");
  }
  const std::string fb = text_or(sec, "feedback", "adaptive", "all-blocks");
  if (fb == "all-blocks") {
    cfg.feedback = FeedbackScope::AllBlocks;
  } else if (fb == "own-block") {
    cfg.feedback = FeedbackScope::OwnBlock;
  } else {
    throw ConfigError("'adaptive.feedback' must be \"all-blocks\" or \"own-block\"");
  }
  cfg.fairness_scaling = flag_or(sec, "fairness_scaling", "adaptive", false);
  cfg.user_snapshot_stride = count_or(sec, "user_snapshot_stride", "adaptive", 0);
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("adaptive: ") + e.what());
  }
  prepare_out(run.out);

  const AdaptiveTrajectory tr = protocol == "su-bs" ? su_bs_run(cfg, p) : su_u_run(cfg, p);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(tr.states.size());
  for (std::size_t b = 0; b < tr.states.size(); ++b) {
    const auto& x = tr.states[b];
    if (b == 0) {
      rows.push_back({"0", num(x.x1()), num(x.x2()), num(x.x3()), "", "", ""});
    } else {
      rows.push_back({std::to_string(b), num(x.x1()), num(x.x2()), num(x.x3()), num(tr.cost_scale[b - 1]),
                      num(tr.est_payoff[b - 1][0]), num(tr.est_payoff[b - 1][1])});
    }
  }
  run.write_table("adaptive_trajectory", {"block", "x1", "x2", "x3", "c", "est_payoff1", "est_payoff2"}, rows);

  json r;
  r["protocol"] = protocol;
  r["final_state"] = jstate(tr.states.back());
  const std::size_t tail = std::min<std::size_t>(20, tr.states.size() - 1);
  r["tail_mean_state"] = jstate(detail::mean_state(std::span(tr.states).last(tail)));
  r["tail_blocks"] = tail;
  r["collapsed"] = tr.collapsed;
  r["collapse_block"] = tr.collapse_block;
  try {
    const auto target = ess_path(cfg.schedule, p);
    r["tracking_error"] = tracking_error(tr, target);
    r["final_target"] = jstate(target.back());
  } catch (const std::exception& e) {
    r["tracking_note"] = e.what();
  }
  if (!tr.dispersion.empty()) r["final_dispersion"] = tr.dispersion.back();
  run.write_json("adaptive_summary.json", r);

  if (protocol == "su-u") {
    json u;
    json fin = json::array();
    for (const auto& x : tr.final_user_states) fin.push_back(jstate(x));
    u["final_user_states"] = fin;
    json snaps = json::array();
    for (std::size_t i = 0; i < tr.snapshot_blocks.size(); ++i) {
      json states = json::array();
      for (const auto& x : tr.user_snapshots[i]) states.push_back(jstate(x));
      snaps.push_back({{"block", tr.snapshot_blocks[i]}, {"states", states}});
    }
    u["snapshots"] = snaps;
    u["dispersion"] = tr.dispersion;
    run.write_json("users.json", u);
  }

  const auto& xf = tr.states.back();
  std::printf("%s: %zu blocks, final x = (%.6f, %.6f, %.6f)%s\n", protocol.c_str(), cfg.schedule.num_blocks, xf.x1(),
              xf.x2(), xf.x3(), tr.collapsed ? "  [collapsed]" : "");
  return 0;
}

int cmd_sweep(const Run& run) {
  check_keys(run.config, "", kTopKeys);
  const json sec = section(run.config, "sweep");
  check_keys(sec, "sweep", {"axis", "values", "from", "to", "step"});
  const GameParams p = parse_game(run.config);
  if (!std::holds_alternative<SnrScaledCost>(p.cost)) {
    throw ConfigError("'sweep' needs the SNR-scaled cost model (config key 'c')");
  }
  const std::string axis_name = text_or(sec, "axis", "sweep", "c");
  SweepAxis axis;
  bool in_db = false;
  if (axis_name == "c") {
    axis = SweepAxis::CostScale;
  } else if (axis_name == "gbar_linear") {
    axis = SweepAxis::AvgSnr;
  } else if (axis_name == "gbar_db") {
    axis = SweepAxis::AvgSnr;
    in_db = true;
  } else {
    throw ConfigError("'sweep.axis' must be \"c\", \"gbar_linear\" or \"gbar_db\"");
  }
  std::vector<double> given;
  if (sec.contains("values")) {
    if (sec.contains("from") || sec.contains("to") || sec.contains("step")) {
      throw ConfigError("'sweep' takes either 'values' or 'from'/'to'/'step'");
    }
    given = number_list(sec.at("values"), "sweep.values");
  } else {
    try {
      given = linspace_step(number(sec, "from", "sweep"), number(sec, "to", "sweep"), number(sec, "step", "sweep"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("sweep: ") + e.what());
    }
  }
  if (given.empty()) throw ConfigError("'sweep' has no points");
  std::vector<double> values = given;
  if (in_db)
    for (double& v : values) v = db_to_linear(v);
  prepare_out(run.out);

  const SweepTable t = sweep(p, axis, values, nullptr, run.workers);
  std::vector<std::vector<std::string>> rows;
  std::size_t invalid = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    invalid += row.ess.valid ? 0 : 1;
    const auto& x = row.ess.state;
    rows.push_back({num(given[i]), num(x.x1()), num(x.x2()), num(x.x3()), row.ess.valid ? "1" : "0",
                    num(row.eta_hnoma), num(row.eta_tdma), num(row.ratio)});
  }
  run.write_table("sweep_" + axis_name, {axis_name, "x1", "x2", "x3", "valid", "eta_hnoma", "eta_tdma", "ratio"},
                  rows);

  const auto to_axis_units = [&](double v) { return in_db ? 10.0 * std::log10(v) : v; };
  json r;
  r["axis"] = axis_name;
  r["points"] = t.rows.size();
  r["invalid_points"] = invalid;
  json cr = json::array();
  for (const auto& c : t.crossovers) cr.push_back({{"at", to_axis_units(c.at)}, {"x1_eq_x2", c.share}});
  r["crossovers"] = cr;
  if (t.closest_row) {
    const auto& row = t.rows[*t.closest_row];
    r["closest"] = {{"at", given[*t.closest_row]}, {"state", jstate(row.ess.state)}};
  }
  run.write_json("sweep_summary.json", r);

  std::printf("sweep over %s: %zu points (%zu invalid), %zu crossover(s)\n", axis_name.c_str(), t.rows.size(),
              invalid, t.crossovers.size());
  for (const auto& c : t.crossovers) std::printf("  x1* = x2* = %.4f at %s = %.4f\n", c.share, axis_name.c_str(),
                                                 to_axis_units(c.at));
  return 0;
}

int cmd_throughput(const Run& run) {
  check_keys(run.config, "", kTopKeys);
  const json sec = section(run.config, "throughput");
  check_keys(sec, "throughput", {"deltas", "grid", "states", "efficiency"});
  const std::vector<double> deltas =
      sec.contains("deltas") ? number_list(sec.at("deltas"), "throughput.deltas") : std::vector<double>{0, 0.2, 0.5, 0.8};
  const std::uint64_t grid = count_or(sec, "grid", "throughput", 200);
  if (grid < 2) throw ConfigError("'throughput.grid' must be at least 2");
  for (double d : deltas) {
    if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("'throughput.deltas' entries must lie in [0, 1]");
  }
  std::vector<State> states;
  if (sec.contains("states")) {
    const json& arr = sec.at("states");
    if (!arr.is_array()) throw ConfigError("'throughput.states' must be an array of states");
    for (std::size_t i = 0; i < arr.size(); ++i) states.push_back(state_value(arr[i], "throughput.states"));
  }
  std::optional<BandwidthEfficiency> eff;
  json eff_in;
  if (sec.contains("efficiency")) {
    eff_in = sec.at("efficiency");
    check_keys(eff_in, "throughput.efficiency", {"M", "F", "alpha"});
    try {
      eff = efficiency(number(eff_in, "M", "throughput.efficiency"), number(eff_in, "F", "throughput.efficiency"),
                       number(eff_in, "alpha", "throughput.efficiency"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("throughput.efficiency: ") + e.what());
    }
  }
  prepare_out(run.out);

  std::vector<std::vector<std::string>> rows;
  for (double d : deltas) {
    const auto opt = throughput_hnoma_opt(d);
    const auto g = throughput_grid_max(d, grid);
    rows.push_back({num(d), num(throughput_oma(d)), num(opt.value), num(opt.argmax.x1()), num(opt.argmax.x2()),
                    num(opt.ratio_to_oma), num(g.value), num(opt.value - g.value)});
  }
  run.write_table("throughput", {"delta", "eta_tdma", "eta_opt", "x1_opt", "x2_opt", "ratio", "grid_opt", "grid_gap"},
                  rows);

  json r;
  r["grid"] = grid;
  json sr = json::array();
  for (const auto& x : states) {
    sr.push_back({{"state", jstate(x)},
                  {"eta_hnoma", throughput_hnoma(x)},
                  {"eta_tdma", throughput_oma(x.x3())}});
  }
  r["states"] = sr;
  if (eff) r["efficiency"] = {{"oma", eff->oma}, {"hybrid", eff->hybrid}};
  run.write_json("throughput_summary.json", r);

  for (const auto& row : rows) {
    std::printf("delta = %s: eta* = %s (grid %s), tdma = %s, ratio = %s\n", row[0].c_str(), row[2].c_str(),
                row[6].c_str(), row[1].c_str(), row[5].c_str());
  }
  return 0;
}

json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid uplink NOMA evolutionary game: ESS, dynamics and simulation"};
  app.set_version_flag("--version", std::string("hnoma ") + HNOMA_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;
  std::string out_dir = "hnoma-out";
  std::string format = "csv";
  app.add_option("--config", config_path, "JSON experiment config")->required();
  app.add_option("--seed", seed, "RNG seed (overrides the config)");
  app.add_option("--workers", workers, "worker threads; never changes results")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));

  std::string protocol;
  auto* ess = app.add_subcommand("ess", "solve for the ESS");
  auto* rep = app.add_subcommand("replicator", "iterate the discrete replicator dynamic");
  auto* sim = app.add_subcommand("simulate", "slot-level Monte-Carlo simulation");
  auto* ada = app.add_subcommand("adaptive", "estimation-driven state updating");
  ada->add_option("protocol", protocol, "su-bs or su-u")->check(CLI::IsMember({"su-bs", "su-u"}));
  auto* swp = app.add_subcommand("sweep", "ESS and throughput along c or the average SNR");
  auto* thr = app.add_subcommand("throughput", "closed-form throughput comparisons");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    Run run;
    run.command = app.get_subcommands().front()->get_name();
    run.out = out_dir;
    run.csv = format == "csv";
    json cfg = load_config(config_path);
    if (!cfg.is_object()) throw ConfigError("config root must be an object");
    if (cfg.contains("workers")) {
      if (!cfg["workers"].is_number_unsigned() || cfg["workers"].get<std::uint64_t>() < 1) {
        throw ConfigError("'workers' must be a positive integer");
      }
      run.workers = cfg["workers"].get<std::size_t>();
      cfg.erase("workers");
    }
    if (workers > 0) run.workers = workers;
    if (seed) {
      cfg["seed"] = *seed;
    } else if (cfg.contains("seed")) {
      if (!cfg["seed"].is_number_unsigned()) throw ConfigError("'seed' must be a non-negative integer");
    }
    if (cfg.contains("seed")) run.seed = cfg["seed"].get<std::uint64_t>();
    run.config = cfg;

    const auto t0 = std::chrono::steady_clock::now();
    int rc = 0;
    if (*ess) rc = cmd_ess(run);
    if (*rep) rc = cmd_replicator(run);
    if (*sim) rc = cmd_simulate(run);
    if (*ada) rc = cmd_adaptive(run, protocol);
    if (*swp) rc = cmd_sweep(run);
    if (*thr) rc = cmd_throughput(run);
    if (fs::is_directory(run.out)) run.write("config.json", run.config.dump(2) + "\n");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("config_hash %s  seed %s  workers %zu  (%.2f s)\n", run.hash().c_str(),
                run.seed ? std::to_string(*run.seed).c_str() : "none", run.workers, secs);
    return rc;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const OutputError& e) {
    std::fprintf(stderr, "output error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
