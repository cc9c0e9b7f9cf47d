// ra-forge: resource-allocation bench CLI.
//   grid      print the 20 MHz RB hierarchy
//   instance  generate a problem instance and dump it as JSON
//   solve     run one solver on one instance
//   run       run a scenario grid and write the results CSV

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "raforge/harness.hpp"
#include "raforge/remote_backend.hpp"

namespace {

using namespace raforge;

UtilityKind parse_utility(const std::string& name) {
  if (name == "sum") return UtilityKind::SumRate;
  if (name == "pf") return UtilityKind::ProportionalFairness;
  throw ConfigError("utility must be sum or pf");
}

QueueModel parse_queue(const std::string& name) {
  if (name == "finite") return QueueModel::Finite;
  if (name == "infinite") return QueueModel::Infinite;
  throw ConfigError("queue must be finite or infinite");
}

void write_trace(const std::vector<std::pair<int, double>>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file " + path);
  out << "step,best_utility\n";
  for (const auto& [step, value] : trace) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", value);
    out << step << ',' << buf << '\n';
  }
}

int cmd_grid() {
  const RbGrid grid = build_grid();
  std::printf("%-6s %-6s %-8s %-11s %-14s %s\n", "level", "index", "tones", "data_tones",
              "bandwidth_hz", "footprint");
  for (const auto& rb : grid.all()) {
    std::printf("%-6d %-6d %-8d %-11d %-14.0f %s\n", rb.id.level, rb.id.index, rb.ru_size,
                rb.data_tones, rb.bandwidth_hz, footprint_string(rb.footprint).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ra-forge: OFDMA uplink resource-allocation bench"};
  app.require_subcommand(1);

  app.add_subcommand("grid", "print the resource-block hierarchy");

  // instance
  auto* instance_cmd = app.add_subcommand("instance", "generate and dump an instance");
  int users = 20, antennas = 4;
  std::uint64_t seed = 1;
  std::string queue = "finite";
  double min_rate_mbps = 0.0;
  std::string out_path;
  instance_cmd->add_option("--users", users, "number of users");
  instance_cmd->add_option("--antennas", antennas, "access point antennas");
  instance_cmd->add_option("--seed", seed, "RNG seed");
  instance_cmd->add_option("--queue", queue, "queue model: finite|infinite");
  instance_cmd->add_option("--min-rate", min_rate_mbps, "per-user minimum rate, Mbps");
  instance_cmd->add_option("--out", out_path, "output file (default stdout)");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "run one solver on one instance");
  std::string solver = "rr", utility_name = "sum";
  std::string trace_path, session_log;
  int max_steps = 0;
  int ga_population = 0, ga_generations = 0;
  solve_cmd->add_option("--solver", solver, "rr|ga|oracle|llm-mock|llm-remote")->required();
  solve_cmd->add_option("--users", users, "number of users");
  solve_cmd->add_option("--antennas", antennas, "access point antennas");
  solve_cmd->add_option("--seed", seed, "RNG seed");
  solve_cmd->add_option("--utility", utility_name, "sum|pf");
  solve_cmd->add_option("--queue", queue, "finite|infinite");
  solve_cmd->add_option("--min-rate", min_rate_mbps, "per-user minimum rate, Mbps");
  solve_cmd->add_option("--trace", trace_path, "write the best-utility trace CSV");
  solve_cmd->add_option("--session-log", session_log, "JSONL log for llm solvers");
  solve_cmd->add_option("--max-steps", max_steps, "llm optimization step budget");
  solve_cmd->add_option("--ga-population", ga_population, "GA population size");
  solve_cmd->add_option("--ga-generations", ga_generations, "GA generations");

  // run
  auto* run_cmd = app.add_subcommand("run", "run a scenario grid");
  int scenario_id = 1;
  std::string scenario_file, solvers_csv = "rr,ga,llm-mock", out_csv = "results.csv";
  std::string min_rate_unit = "mbps";
  int trials = 1;
  run_cmd->add_option("--scenario", scenario_id, "scenario id 1-4");
  run_cmd->add_option("--scenario-file", scenario_file, "custom scenario key=value file");
  run_cmd->add_option("--solvers", solvers_csv, "comma-separated solver list");
  run_cmd->add_option("--trials", trials, "trials per sweep point");
  run_cmd->add_option("--seed", seed, "root RNG seed");
  run_cmd->add_option("--out", out_csv, "results CSV path");
  run_cmd->add_option("--min-rate-unit", min_rate_unit, "mbps|kbps|bps");
  run_cmd->add_option("--max-steps", max_steps, "llm optimization step budget");
  run_cmd->add_option("--ga-population", ga_population, "GA population size");
  run_cmd->add_option("--ga-generations", ga_generations, "GA generations");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("grid")) return cmd_grid();

    if (app.got_subcommand("instance")) {
      InstanceConfig config;
      config.users = users;
      config.antennas = antennas;
      config.seed = seed;
      config.queue_model = parse_queue(queue);
      config.min_rate_bps = min_rate_mbps * 1e6;
      const NetworkInstance instance = generate_instance(config);
      const std::string dump = to_json(instance).dump(2);
      if (out_path.empty()) {
        std::cout << dump << "\n";
      } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << dump << "\n";
      }
      return 0;
    }

    if (app.got_subcommand("solve")) {
      InstanceConfig config;
      config.users = users;
      config.antennas = antennas;
      config.seed = seed;
      config.queue_model = parse_queue(queue);
      config.min_rate_bps = min_rate_mbps * 1e6;
      const NetworkInstance instance = generate_instance(config);
      const UtilityKind kind = parse_utility(utility_name);

      HarnessOptions options;
      if (ga_population > 0) options.ga.population_size = ga_population;
      if (ga_generations > 0) options.ga.generations = ga_generations;
      if (max_steps > 0) options.llm.max_steps = max_steps;
      options.llm.session_log_path = session_log;
      options.remote_factory = [](const NetworkInstance&) { return remote_backend(); };

      Rng rng(mix64(seed ^ fnv1a(solver)));
      SolverResult result;
      if (solver == "rr") {
        result = round_robin_solve(instance, kind);
      } else if (solver == "ga") {
        result = genetic_search(instance, kind, options.ga, rng);
      } else if (solver == "oracle") {
        result = exhaustive_oracle(instance, kind);
      } else if (solver == "llm-mock" || solver == "llm-remote") {
        std::unique_ptr<ProposalBackend> backend =
            solver == "llm-mock" ? mock_backend(instance) : remote_backend();
        const OptimizeResult opt = optimize(instance, kind, *backend, options.llm, rng);
        result = SolverResult{opt.allocation, opt.evaluation, opt.trace};
        if (opt.aborted) std::cerr << "warning: run aborted by transport failure; "
                                   << "best allocation so far reported\n";
      } else {
        throw ConfigError("unknown solver \"" + solver + "\"");
      }

      const std::string text = to_canonical_text(result.allocation);
      std::cout << (text.empty() ? "(empty allocation)\n" : text);
      std::printf("utility: %.6f\n", result.evaluation.utility_value);
      std::printf("feasible: %s\n", result.evaluation.feasible ? "true" : "false");
      if (!trace_path.empty()) write_trace(result.trace, trace_path);
      return result.evaluation.feasible ? 0 : 1;
    }

    if (app.got_subcommand("run")) {
      const ScenarioConfig scenario =
          scenario_file.empty() ? load_scenario(scenario_id) : load_scenario_file(scenario_file);

      HarnessOptions options;
      options.trials = trials;
      options.rng_seed = seed;
      if (ga_population > 0) options.ga.population_size = ga_population;
      if (ga_generations > 0) options.ga.generations = ga_generations;
      if (max_steps > 0) options.llm.max_steps = max_steps;
      if (min_rate_unit == "mbps") options.min_rate_unit_bps = 1e6;
      else if (min_rate_unit == "kbps") options.min_rate_unit_bps = 1e3;
      else if (min_rate_unit == "bps") options.min_rate_unit_bps = 1.0;
      else throw ConfigError("min-rate-unit must be mbps, kbps or bps");
      options.remote_factory = [](const NetworkInstance&) { return remote_backend(); };

      std::vector<std::string> solvers;
      std::stringstream ss(solvers_csv);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) solvers.push_back(item);

      std::vector<RunResult> results = run_grid(scenario, solvers, options);
      const std::string reference =
          std::find(solvers.begin(), solvers.end(), "ga") != solvers.end() ? "ga"
                                                                           : solvers.front();
      normalize_scores(results, reference);
      emit_report(results, out_csv);
      std::cout << "wrote " << results.size() << " runs to " << out_csv
                << " (normalized against " << reference << ")\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
