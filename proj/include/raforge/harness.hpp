#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "raforge/channel_model.hpp"
#include "raforge/errors.hpp"
#include "raforge/llm_optimizer.hpp"
#include "raforge/solvers.hpp"

namespace raforge {

/// One point of a scenario sweep: instance size, QoS floor, and the value
/// that labels the point on the x-axis.
struct SweepPoint {
  int users = 0;
  double min_rate_mbps = 0.0;
  double sweep_value = 0.0;
};

struct ScenarioConfig {
  int id = 0;  // 1..4 for the built-in grid, 0 for custom files
  UtilityKind utility = UtilityKind::SumRate;
  QueueModel queue_model = QueueModel::Finite;
  std::vector<int> user_sweep;
  std::vector<double> min_rate_sweep_mbps;

  /// The sweep runs over the minimum rate when that is the multi-valued
  /// axis, otherwise over the user count.
  std::vector<SweepPoint> sweep_points() const {
    std::vector<SweepPoint> points;
    if (min_rate_sweep_mbps.size() > 1) {
      const int users = user_sweep.empty() ? 0 : user_sweep.front();
      for (double rate : min_rate_sweep_mbps)
        points.push_back({users, rate, rate});
    } else {
      const double rate = min_rate_sweep_mbps.empty() ? 0.0 : min_rate_sweep_mbps.front();
      for (int users : user_sweep)
        points.push_back({users, rate, static_cast<double>(users)});
    }
    return points;
  }
};

/// The four built-in configurations: sum-rate with finite queues over a user
/// sweep; sum-rate at K=20 over a minimum-rate sweep; sum-rate with
/// unbounded queues; proportional fairness with finite queues.
inline ScenarioConfig load_scenario(int id) {
  switch (id) {
    case 1:
      return {1, UtilityKind::SumRate, QueueModel::Finite, {10, 20, 30, 40, 50}, {0.0}};
    case 2:
      return {2, UtilityKind::SumRate, QueueModel::Finite, {20},
              {20.0, 40.0, 60.0, 80.0, 100.0}};
    case 3:
      return {3, UtilityKind::SumRate, QueueModel::Infinite, {10, 20, 30, 40, 50}, {0.0}};
    case 4:
      return {4, UtilityKind::ProportionalFairness, QueueModel::Finite,
              {10, 20, 30, 40, 50}, {0.0}};
    default:
      throw ConfigError("unknown scenario id " + std::to_string(id));
  }
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace detail

/// Custom grids from an INI-style key=value file:
///   utility = sum | pf
///   queue_model = finite | infinite
///   users = 10, 20, 30
///   min_rate = 0
/// '#' starts a comment.
inline ScenarioConfig load_scenario_stream(std::istream& in) {
  ScenarioConfig config;
  config.id = 0;
  config.min_rate_sweep_mbps = {0.0};
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("scenario file: expected key = value, got \"" + stripped + "\"");
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key == "utility") {
      if (value == "sum") config.utility = UtilityKind::SumRate;
      else if (value == "pf") config.utility = UtilityKind::ProportionalFairness;
      else throw ConfigError("scenario file: utility must be sum or pf");
    } else if (key == "queue_model") {
      if (value == "finite") config.queue_model = QueueModel::Finite;
      else if (value == "infinite") config.queue_model = QueueModel::Infinite;
      else throw ConfigError("scenario file: queue_model must be finite or infinite");
    } else if (key == "users" || key == "min_rate") {
      std::vector<double> values;
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const std::string token = detail::trim(item);
        if (token.empty()) continue;
        try {
          values.push_back(std::stod(token));
        } catch (const std::exception&) {
          throw ConfigError("scenario file: bad number \"" + token + "\"");
        }
      }
      if (values.empty()) throw ConfigError("scenario file: empty list for " + key);
      if (key == "users") {
        config.user_sweep.clear();
        for (double v : values) config.user_sweep.push_back(static_cast<int>(v));
      } else {
        config.min_rate_sweep_mbps = values;
      }
    } else {
      throw ConfigError("scenario file: unknown key \"" + key + "\"");
    }
  }
  if (config.user_sweep.empty())
    throw ConfigError("scenario file: users is required");
  return config;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  return load_scenario_stream(in);
}

struct RunResult {
  int scenario_id = 0;
  double sweep_value = 0.0;
  std::string solver;
  std::uint64_t seed = 0;
  double utility = 0.0;
  bool feasible = false;
  double wall_time_s = 0.0;
  double normalized_score = std::numeric_limits<double>::quiet_NaN();
  // not part of the CSV schema
  int trial = 0;
  UtilityKind utility_kind = UtilityKind::SumRate;
  bool norm_flagged = false;
  bool failed = false;
};

struct HarnessOptions {
  int antennas = 4;
  GaParams ga;
  OptimizeSettings llm;
  int trials = 1;
  std::uint64_t rng_seed = 1;
  double min_rate_unit_bps = 1e6;  // scenario min-rate values are Mbps by default
  bool record_timing = true;
  /// Builds the backend for the "llm-remote" solver; defaults to the
  /// environment-configured chat-completions client.
  std::function<std::unique_ptr<ProposalBackend>(const NetworkInstance&)> remote_factory;
  /// Observation hook invoked after every run (tests use it to audit
  /// instances and allocations); never alters results.
  std::function<void(const RunResult&, const Allocation&, const NetworkInstance&)> on_run;
};

/// Deterministic per-run seed: every solver at one (scenario, sweep, trial)
/// point sees the identical instance.
inline std::uint64_t derive_seed(std::uint64_t root, int scenario_id, double sweep_value,
                                 int trial) {
  std::uint64_t x = mix64(root);
  x = mix64(x ^ static_cast<std::uint64_t>(scenario_id));
  std::uint64_t sweep_bits;
  static_assert(sizeof(sweep_bits) == sizeof(sweep_value));
  std::memcpy(&sweep_bits, &sweep_value, sizeof(sweep_bits));
  x = mix64(x ^ sweep_bits);
  x = mix64(x ^ static_cast<std::uint64_t>(trial));
  return x;
}

namespace detail {

inline SolverResult dispatch_solver(const std::string& name, const NetworkInstance& instance,
                                    UtilityKind kind, const HarnessOptions& options,
                                    std::uint64_t run_seed) {
  Rng rng(mix64(run_seed ^ fnv1a(name)));
  if (name == "rr") return round_robin_solve(instance, kind);
  if (name == "ga") return genetic_search(instance, kind, options.ga, rng);
  if (name == "oracle") return exhaustive_oracle(instance, kind);
  if (name == "llm-mock" || name == "llm-remote") {
    std::unique_ptr<ProposalBackend> backend;
    if (name == "llm-mock") {
      backend = mock_backend(instance);
    } else {
      if (!options.remote_factory)
        throw ConfigError("llm-remote requires HarnessOptions::remote_factory "
                          "(wire it to remote_backend())");
      backend = options.remote_factory(instance);
    }
    const OptimizeResult opt = optimize(instance, kind, *backend, options.llm, rng);
    return SolverResult{opt.allocation, opt.evaluation, opt.trace};
  }
  throw ConfigError("unknown solver \"" + name + "\"");
}

}  // namespace detail

/// Runs every named solver on the same generated instance at each sweep
/// point x trial. Oracle runs are skipped (not failed) beyond its size cap.
/// A throwing solver is recorded as a failed run and the grid continues.
inline std::vector<RunResult> run_grid(const ScenarioConfig& scenario,
                                       const std::vector<std::string>& solvers,
                                       const HarnessOptions& options) {
  if (options.trials < 1) throw ConfigError("run_grid: trials must be >= 1");
  std::vector<RunResult> results;
  for (const SweepPoint& point : scenario.sweep_points()) {
    for (int trial = 0; trial < options.trials; ++trial) {
      const std::uint64_t seed =
          derive_seed(options.rng_seed, scenario.id, point.sweep_value, trial);
      InstanceConfig config;
      config.users = point.users;
      config.antennas = options.antennas;
      config.seed = seed;
      config.queue_model = scenario.queue_model;
      config.min_rate_bps = point.min_rate_mbps * options.min_rate_unit_bps;
      const NetworkInstance instance = generate_instance(config);

      for (const std::string& solver : solvers) {
        if (solver == "oracle" && instance.user_count() > kOracleMaxUsers) continue;
        RunResult run;
        run.scenario_id = scenario.id;
        run.sweep_value = point.sweep_value;
        run.solver = solver;
        run.seed = seed;
        run.trial = trial;
        run.utility_kind = scenario.utility;

        const auto start = std::chrono::steady_clock::now();
        Allocation allocation;
        try {
          SolverResult solved =
              detail::dispatch_solver(solver, instance, scenario.utility, options, seed);
          run.utility = solved.evaluation.utility_value;
          run.feasible = solved.evaluation.feasible;
          allocation = std::move(solved.allocation);
        } catch (const std::exception&) {
          run.failed = true;
          run.utility = std::numeric_limits<double>::quiet_NaN();
          run.feasible = false;
        }
        if (options.record_timing) {
          run.wall_time_s =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
        if (options.on_run) options.on_run(run, allocation, instance);
        results.push_back(std::move(run));
      }
    }
  }
  return results;
}

/// Normalizes every run against the reference solver at the same grid point.
/// Sum-rate scores are plain ratios. Proportional fairness subtracts 100
/// from both sides first; when the reference does not exceed 100 that
/// adjustment would flip signs, so the row falls back to a plain ratio and
/// is flagged.
inline void normalize_scores(std::vector<RunResult>& results, const std::string& reference) {
  std::map<std::tuple<int, double, std::uint64_t>, double> reference_utility;
  for (const auto& run : results)
    if (run.solver == reference && !run.failed)
      reference_utility[{run.scenario_id, run.sweep_value, run.seed}] = run.utility;

  for (auto& run : results) {
    if (run.failed) continue;
    const auto it = reference_utility.find({run.scenario_id, run.sweep_value, run.seed});
    if (it == reference_utility.end())
      throw ConfigError("normalize_scores: no \"" + reference + "\" run for scenario " +
                        std::to_string(run.scenario_id) + " sweep " +
                        std::to_string(run.sweep_value) + " seed " +
                        std::to_string(run.seed));
    const double ref = it->second;
    run.norm_flagged = false;
    if (run.utility_kind == UtilityKind::ProportionalFairness) {
      if (ref > 100.0) {
        run.normalized_score = (run.utility - 100.0) / (ref - 100.0);
        continue;
      }
      run.norm_flagged = true;
    }
    if (ref > 0.0) {
      run.normalized_score = run.utility / ref;
    } else {
      run.normalized_score = run.utility == 0.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
      run.norm_flagged = true;
    }
  }
}

namespace detail {

inline std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return std::string(buf);
}

}  // namespace detail

/// CSV with the fixed column order, then a per-(scenario, sweep, solver)
/// mean/stddev summary as '#' comment lines. Output depends only on the
/// result values, so re-emitting the same results is byte-identical.
inline void emit_report(const std::vector<RunResult>& results, std::ostream& out) {
  std::vector<RunResult> sorted = results;
  std::stable_sort(sorted.begin(), sorted.end(), [](const RunResult& a, const RunResult& b) {
    return std::tie(a.scenario_id, a.sweep_value, a.solver, a.seed) <
           std::tie(b.scenario_id, b.sweep_value, b.solver, b.seed);
  });

  out << "scenario,sweep_value,solver,seed,utility,feasible,wall_time_s,normalized_score\n";
  for (const auto& run : sorted) {
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.6f", run.wall_time_s);
    out << run.scenario_id << ',' << detail::csv_number(run.sweep_value) << ',' << run.solver
        << ',' << run.seed << ',' << detail::csv_number(run.utility) << ','
        << (run.feasible ? "true" : "false") << ',' << wall << ','
        << detail::csv_number(run.normalized_score) << '\n';
  }

  struct Cell {
    std::vector<double> utilities;
    std::vector<double> normalized;
    int flagged = 0;
  };
  std::map<std::tuple<int, double, std::string>, Cell> cells;
  for (const auto& run : sorted) {
    Cell& cell = cells[{run.scenario_id, run.sweep_value, run.solver}];
    if (!std::isnan(run.utility)) cell.utilities.push_back(run.utility);
    if (!std::isnan(run.normalized_score)) cell.normalized.push_back(run.normalized_score);
    if (run.norm_flagged) ++cell.flagged;
  }
  auto mean_of = [](const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto stddev_of = [&](const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
  };
  out << "# summary\n";
  out << "# scenario,sweep_value,solver,runs,utility_mean,utility_stddev,"
         "normalized_mean,normalized_stddev,flagged_rows\n";
  for (const auto& [key, cell] : cells) {
    out << "# " << std::get<0>(key) << ',' << detail::csv_number(std::get<1>(key)) << ','
        << std::get<2>(key) << ',' << cell.utilities.size() << ','
        << detail::csv_number(mean_of(cell.utilities)) << ','
        << detail::csv_number(stddev_of(cell.utilities)) << ','
        << detail::csv_number(mean_of(cell.normalized)) << ','
        << detail::csv_number(stddev_of(cell.normalized)) << ',' << cell.flagged << '\n';
  }
}

inline void emit_report(const std::vector<RunResult>& results, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_report: cannot write " + path);
  emit_report(results, out);
}

}  // namespace raforge
