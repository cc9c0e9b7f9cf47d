#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "raforge/allocation.hpp"
#include "raforge/errors.hpp"
#include "raforge/rng.hpp"

namespace raforge {

/// Common solver output: a structurally valid allocation (feasible whenever
/// any feasible one was found), its evaluation, and a best-utility trace.
struct SolverResult {
  Allocation allocation;
  EvaluationResult evaluation;
  std::vector<std::pair<int, double>> trace;  // (step, best utility so far)
};

// --- Round-robin -------------------------------------------------------------

/// Wideband SNR used for ranking: P * mean_ru ||h||^2 / (N0 * B_26tone).
inline double wideband_snr(const UserState& user, const NetworkInstance& instance) {
  double mean_norm2 = 0.0;
  for (const auto& h : user.ru_channels) mean_norm2 += h.squaredNorm();
  mean_norm2 /= static_cast<double>(kNumBasicRbs);
  const double sigma2 = instance.noise_variance(RbId{0, 0});
  return user.tx_power_w * mean_norm2 / sigma2;
}

/// Deterministic baseline: rank users by wideband SNR (ties to the lower
/// index) and hand out the nine 26-tone RBs in index order, one user each.
/// A user whose rate on the offered RB misses their QoS floor is passed over
/// for that RB and the next-ranked user is tried.
inline Allocation round_robin(const NetworkInstance& instance) {
  std::vector<int> order(static_cast<std::size_t>(instance.user_count()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> snr(order.size());
  for (std::size_t k = 0; k < snr.size(); ++k)
    snr[k] = wideband_snr(instance.users[k], instance);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = snr[static_cast<std::size_t>(a)];
    const double sb = snr[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  });

  Allocation alloc;
  std::vector<bool> placed(order.size(), false);
  for (int index = 0; index < RbGrid::level_size(0); ++index) {
    const RbId rb{0, index};
    for (int k : order) {
      if (placed[static_cast<std::size_t>(k)]) continue;
      const double required = instance.users[static_cast<std::size_t>(k)].min_rate_bps;
      if (required > 0.0) {
        const double rate = rb_rate(k, CoScheduledSet{rb, {k}}, instance);
        if (rate < required) continue;
      }
      alloc.add(rb, k);
      placed[static_cast<std::size_t>(k)] = true;
      break;
    }
  }
  return alloc;
}

inline SolverResult round_robin_solve(const NetworkInstance& instance, UtilityKind kind) {
  SolverResult result;
  result.allocation = round_robin(instance);
  result.evaluation = evaluate(result.allocation, instance, kind);
  result.trace = {{0, result.evaluation.utility_value}};
  return result;
}

// --- Genome helpers ----------------------------------------------------------
// Genome: one gene per user, -1 for unallocated or the RB ordinal in [0, 16).

namespace detail {

inline Allocation decode_genome(const std::vector<int>& genome, const RbGrid& grid) {
  Allocation alloc;
  for (std::size_t k = 0; k < genome.size(); ++k) {
    if (genome[k] < 0) continue;
    alloc.add(grid.all()[static_cast<std::size_t>(genome[k])].id, static_cast<int>(k));
  }
  return alloc;
}

inline std::vector<int> encode_allocation(const Allocation& alloc, int users,
                                          const RbGrid& grid) {
  std::vector<int> genome(static_cast<std::size_t>(users), -1);
  for (const auto& [rb, members] : alloc.assignments)
    for (int k : members) genome[static_cast<std::size_t>(k)] = grid.ordinal(rb);
  return genome;
}

/// Users implicated in any reported violation.
inline std::set<int> violating_users(const ViolationReport& report, const Allocation& alloc) {
  std::set<int> users;
  for (const auto& v : report.violations) {
    if (v.user >= 0) users.insert(v.user);
    for (const auto& rb : v.rbs) {
      auto it = alloc.assignments.find(rb);
      if (it == alloc.assignments.end()) continue;
      users.insert(it->second.begin(), it->second.end());
    }
  }
  return users;
}

}  // namespace detail

/// Greedy feasibility repair: while any constraint is violated, drop the
/// implicated user with the lowest utility contribution (ties to the lower
/// index). Terminates because the empty allocation is feasible.
inline Allocation repair_allocation(Allocation alloc, const NetworkInstance& instance,
                                    UtilityKind kind) {
  for (;;) {
    const EvaluationResult eval = evaluate(alloc, instance, kind);
    if (eval.feasible) return alloc;
    const std::set<int> candidates = detail::violating_users(eval.violations, alloc);
    int drop = -1;
    double drop_term = std::numeric_limits<double>::infinity();
    for (int k : candidates) {
      const double mbps =
          eval.rates.per_user_effective[static_cast<std::size_t>(k)] / 1e6;
      const double term =
          kind == UtilityKind::SumRate ? mbps : std::log1p(mbps);
      if (term < drop_term) {
        drop_term = term;
        drop = k;
      }
    }
    alloc.remove_user(drop);
  }
}

// --- Genetic algorithm -------------------------------------------------------

struct GaParams {
  int population_size = 128;
  int generations = 500;
  double crossover_rate = 0.9;
  double mutation_rate = 0.05;  // per gene
  int elite_count = 4;
  int tournament_size = 3;

  void validate() const {
    if (population_size < 2) throw ConfigError("GaParams: population_size must be >= 2");
    if (elite_count < 0 || elite_count >= population_size)
      throw ConfigError("GaParams: elite_count must be in [0, population_size)");
    if (crossover_rate < 0.0 || crossover_rate > 1.0 ||
        mutation_rate < 0.0 || mutation_rate > 1.0)
      throw ConfigError("GaParams: rates must be in [0, 1]");
    if (generations < 1) throw ConfigError("GaParams: generations must be >= 1");
    if (tournament_size < 1) throw ConfigError("GaParams: tournament_size must be >= 1");
  }
};

/// Tournament-selection GA over per-user RB genes. Infeasible decodes are
/// repaired by dropping users, so every fitness is the utility of a feasible
/// allocation. The population is seeded with the round-robin solution, which
/// together with elitism makes the result dominate round-robin exactly.
inline SolverResult genetic_search(const NetworkInstance& instance, UtilityKind kind,
                                   const GaParams& params, Rng& rng) {
  params.validate();
  const int users = instance.user_count();
  const int gene_options = instance.grid.size() + 1;  // {none} + 16 RBs

  struct Individual {
    std::vector<int> genome;
    Allocation repaired;
    double fitness = 0.0;
  };

  auto assess = [&](std::vector<int> genome) {
    Individual ind;
    ind.repaired = repair_allocation(detail::decode_genome(genome, instance.grid),
                                     instance, kind);
    ind.genome = std::move(genome);
    ind.fitness = evaluate(ind.repaired, instance, kind).utility_value;
    return ind;
  };

  auto random_genome = [&] {
    std::vector<int> genome(static_cast<std::size_t>(users));
    for (auto& g : genome) g = rng.uniform_index(gene_options) - 1;
    return genome;
  };

  std::vector<Individual> population;
  population.reserve(static_cast<std::size_t>(params.population_size));
  population.push_back(
      assess(detail::encode_allocation(round_robin(instance), users, instance.grid)));
  while (static_cast<int>(population.size()) < params.population_size)
    population.push_back(assess(random_genome()));

  auto by_fitness = [](const Individual& a, const Individual& b) {
    return a.fitness > b.fitness;
  };
  std::stable_sort(population.begin(), population.end(), by_fitness);

  Allocation best = population.front().repaired;
  double best_fitness = population.front().fitness;

  SolverResult result;
  result.trace.reserve(static_cast<std::size_t>(params.generations) + 1);
  result.trace.emplace_back(0, best_fitness);

  auto tournament = [&]() -> const Individual& {
    int winner = rng.uniform_index(params.population_size);
    for (int i = 1; i < params.tournament_size; ++i) {
      const int challenger = rng.uniform_index(params.population_size);
      if (population[static_cast<std::size_t>(challenger)].fitness >
          population[static_cast<std::size_t>(winner)].fitness)
        winner = challenger;
    }
    return population[static_cast<std::size_t>(winner)];
  };

  for (int generation = 1; generation <= params.generations; ++generation) {
    std::vector<Individual> next;
    next.reserve(static_cast<std::size_t>(params.population_size));
    for (int e = 0; e < params.elite_count; ++e)
      next.push_back(population[static_cast<std::size_t>(e)]);

    while (static_cast<int>(next.size()) < params.population_size) {
      const Individual& parent_a = tournament();
      const Individual& parent_b = tournament();
      std::vector<int> child = parent_a.genome;
      if (rng.uniform() < params.crossover_rate) {
        for (std::size_t g = 0; g < child.size(); ++g)
          if (rng.uniform() < 0.5) child[g] = parent_b.genome[g];
      }
      for (auto& gene : child)
        if (rng.uniform() < params.mutation_rate)
          gene = rng.uniform_index(gene_options) - 1;
      next.push_back(assess(std::move(child)));
    }

    population = std::move(next);
    std::stable_sort(population.begin(), population.end(), by_fitness);
    if (population.front().fitness > best_fitness) {
      best_fitness = population.front().fitness;
      best = population.front().repaired;
    }
    result.trace.emplace_back(generation, best_fitness);
  }

  result.allocation = std::move(best);
  result.evaluation = evaluate(result.allocation, instance, kind);
  return result;
}

// --- Exhaustive oracle -------------------------------------------------------

inline constexpr int kOracleMaxUsers = 6;

/// Ground truth for small instances: enumerates every per-user choice in
/// {none} + 16 RBs, pruning branches that already break C2/C3, and keeps the
/// feasible allocation with maximum utility (ties by canonical-text order).
/// Refuses K > 6; the search space is (16+1)^K.
inline SolverResult exhaustive_oracle(const NetworkInstance& instance, UtilityKind kind) {
  const int users = instance.user_count();
  if (users > kOracleMaxUsers)
    throw ConfigError("exhaustive_oracle: refusing K=" + std::to_string(users) +
                      " (limit " + std::to_string(kOracleMaxUsers) + ")");

  const auto& rbs = instance.grid.all();
  const int rb_count = instance.grid.size();

  // Per-(rb, coset) theoretical rates, memoized across leaves. The coset is a
  // user bitmask; K <= 6 keeps the table tiny.
  std::unordered_map<std::uint32_t, std::vector<double>> rate_cache;
  auto coset_rates = [&](int rb_ordinal, std::uint32_t mask) -> const std::vector<double>& {
    const std::uint32_t key =
        static_cast<std::uint32_t>(rb_ordinal) << 16 | mask;
    auto it = rate_cache.find(key);
    if (it != rate_cache.end()) return it->second;
    CoScheduledSet coset{rbs[static_cast<std::size_t>(rb_ordinal)].id, {}};
    for (int k = 0; k < users; ++k)
      if (mask & (1u << k)) coset.users.push_back(k);
    std::vector<double> rates(static_cast<std::size_t>(users), 0.0);
    for (int k : coset.users) rates[static_cast<std::size_t>(k)] = rb_rate(k, coset, instance);
    return rate_cache.emplace(key, std::move(rates)).first->second;
  };

  std::vector<int> genome(static_cast<std::size_t>(users), -1);
  std::vector<std::uint32_t> rb_masks(static_cast<std::size_t>(rb_count), 0);
  std::vector<int> rb_loads(static_cast<std::size_t>(rb_count), 0);

  double best_utility = -1.0;
  std::string best_text;
  Allocation best_alloc;

  // Footprints as 9-bit masks for the C2 prune.
  std::vector<std::uint32_t> fp(static_cast<std::size_t>(rb_count), 0);
  for (int r = 0; r < rb_count; ++r)
    fp[static_cast<std::size_t>(r)] =
        static_cast<std::uint32_t>(rbs[static_cast<std::size_t>(r)].footprint.to_ulong());

  auto evaluate_leaf = [&] {
    double total = 0.0;
    for (int k = 0; k < users; ++k) {
      const int g = genome[static_cast<std::size_t>(k)];
      double raw = 0.0;
      if (g >= 0) {
        raw = coset_rates(g, rb_masks[static_cast<std::size_t>(g)])[static_cast<std::size_t>(k)];
        const double required = instance.users[static_cast<std::size_t>(k)].min_rate_bps;
        if (required > 0.0 && raw < required) return;  // QoS-infeasible leaf
      }
      const double capped =
          std::min(raw, instance.users[static_cast<std::size_t>(k)].queue_bits / instance.tx_time_s);
      const double mbps = capped / 1e6;
      total += kind == UtilityKind::SumRate ? mbps : std::log1p(mbps);
    }
    if (total < best_utility) return;
    Allocation alloc = detail::decode_genome(genome, instance.grid);
    const std::string text = to_canonical_text(alloc);
    if (total > best_utility || text < best_text) {
      best_utility = total;
      best_text = text;
      best_alloc = std::move(alloc);
    }
  };

  std::uint32_t occupied_fp = 0;
  auto recurse = [&](auto&& self, int k) -> void {
    if (k == users) {
      evaluate_leaf();
      return;
    }
    genome[static_cast<std::size_t>(k)] = -1;
    self(self, k + 1);
    for (int r = 0; r < rb_count; ++r) {
      const bool newly_occupied = rb_loads[static_cast<std::size_t>(r)] == 0;
      if (newly_occupied && (fp[static_cast<std::size_t>(r)] & occupied_fp)) continue;  // C2
      if (rb_loads[static_cast<std::size_t>(r)] >=
          instance.grid.capacity(rbs[static_cast<std::size_t>(r)].id, instance.antennas))
        continue;  // C3
      genome[static_cast<std::size_t>(k)] = r;
      rb_loads[static_cast<std::size_t>(r)] += 1;
      rb_masks[static_cast<std::size_t>(r)] |= 1u << k;
      if (newly_occupied) occupied_fp |= fp[static_cast<std::size_t>(r)];
      self(self, k + 1);
      if (newly_occupied) occupied_fp &= ~fp[static_cast<std::size_t>(r)];
      rb_masks[static_cast<std::size_t>(r)] &= ~(1u << k);
      rb_loads[static_cast<std::size_t>(r)] -= 1;
    }
    genome[static_cast<std::size_t>(k)] = -1;
  };
  recurse(recurse, 0);

  SolverResult result;
  result.allocation = std::move(best_alloc);
  result.evaluation = evaluate(result.allocation, instance, kind);
  result.trace = {{0, result.evaluation.utility_value}};
  return result;
}

// --- Random structurally-feasible allocations --------------------------------

/// Random allocation satisfying C1/C2/C3 by construction (QoS is not
/// checked). Used for mock-optimizer proposals and property tests.
inline Allocation random_allocation(const NetworkInstance& instance, Rng& rng) {
  const auto& rbs = instance.grid.all();
  std::vector<int> pool(static_cast<std::size_t>(instance.user_count()));
  std::iota(pool.begin(), pool.end(), 0);
  // Fisher-Yates with the portable rng
  for (std::size_t i = pool.size(); i > 1; --i)
    std::swap(pool[i - 1], pool[static_cast<std::size_t>(rng.uniform_int(i))]);

  Allocation alloc;
  Footprint occupied;
  std::size_t next_user = 0;
  while (next_user < pool.size()) {
    std::vector<int> compatible;
    for (int r = 0; r < instance.grid.size(); ++r)
      if ((rbs[static_cast<std::size_t>(r)].footprint & occupied).none())
        compatible.push_back(r);
    if (compatible.empty()) break;
    if (rng.uniform() < 0.15) break;  // vary allocation sizes
    const auto& info =
        rbs[static_cast<std::size_t>(compatible[static_cast<std::size_t>(
            rng.uniform_index(static_cast<int>(compatible.size())))])];
    const int cap = instance.grid.capacity(info.id, instance.antennas);
    const int remaining = static_cast<int>(pool.size() - next_user);
    const int count = 1 + rng.uniform_index(std::min(cap, remaining));
    for (int i = 0; i < count; ++i) alloc.add(info.id, pool[next_user++]);
    occupied |= info.footprint;
  }
  return alloc;
}

}  // namespace raforge
