#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "raforge/link_layer.hpp"

namespace raforge {

/// Binary assignment of users to RBs, as a map from RB to its user set.
/// Constraint satisfaction is deliberately not an invariant: infeasible
/// allocations are first-class so they can be scored and fed back.
struct Allocation {
  std::map<RbId, std::set<int>> assignments;

  bool operator==(const Allocation&) const = default;

  void add(RbId rb, int user) { assignments[rb].insert(user); }

  bool empty() const { return assignments.empty(); }

  /// RBs with at least one user.
  std::vector<RbId> occupied() const {
    std::vector<RbId> rbs;
    for (const auto& [rb, users] : assignments)
      if (!users.empty()) rbs.push_back(rb);
    return rbs;
  }

  std::vector<RbId> rbs_of(int user) const {
    std::vector<RbId> rbs;
    for (const auto& [rb, users] : assignments)
      if (users.count(user)) rbs.push_back(rb);
    return rbs;
  }

  /// Drops a user everywhere; removes emptied RB entries.
  void remove_user(int user) {
    for (auto it = assignments.begin(); it != assignments.end();) {
      it->second.erase(user);
      it = it->second.empty() ? assignments.erase(it) : std::next(it);
    }
  }
};

enum class Constraint { C1, C2, C3, QoS };

inline const char* constraint_name(Constraint c) {
  switch (c) {
    case Constraint::C1: return "C1";
    case Constraint::C2: return "C2";
    case Constraint::C3: return "C3";
    case Constraint::QoS: return "QoS";
  }
  return "?";
}

/// One constraint breach. `detail` is human-readable (0-based indices); the
/// structured fields let callers re-render with their own index convention.
struct Violation {
  Constraint constraint = Constraint::C1;
  std::string detail;
  int user = -1;             // C1/QoS
  std::vector<RbId> rbs;     // offending RBs
  int position = -1;         // C2: colliding 26-tone position
  double actual = 0.0;       // C3: occupancy; QoS: rate in bps
  double required = 0.0;     // C3: capacity;  QoS: min rate in bps
};

struct ViolationReport {
  std::vector<Violation> violations;

  bool empty() const { return violations.empty(); }

  void append(ViolationReport other) {
    for (auto& v : other.violations) violations.push_back(std::move(v));
  }
};

enum class UtilityKind { SumRate, ProportionalFairness };

struct RateReport {
  /// Theoretical rate r for every allocated (user, rb) pair, bits/s.
  std::map<std::pair<int, RbId>, double> per_user_rb_rate;
  /// Queue-capped effective rate per user, bits/s; 0 for unallocated users.
  std::vector<double> per_user_effective;
};

struct EvaluationResult {
  RateReport rates;
  double utility_value = 0.0;
  ViolationReport violations;
  bool feasible = false;
};

namespace detail {

inline std::string format_mbps(double bps) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", bps / 1e6);
  return std::string(buf);
}

}  // namespace detail

/// Throws std::invalid_argument for user/RB references outside the instance;
/// structural invalidity is an error, distinct from infeasibility.
inline void validate_structure(const Allocation& alloc, const NetworkInstance& instance) {
  for (const auto& [rb, users] : alloc.assignments) {
    if (!instance.grid.contains(rb))
      throw std::invalid_argument("allocation references unknown " + rb.to_string());
    for (int k : users)
      if (k < 0 || k >= instance.user_count())
        throw std::invalid_argument("allocation references unknown user " + std::to_string(k));
  }
}

/// Constraint 1: a user may appear on at most one RB.
inline ViolationReport check_c1(const Allocation& alloc, const NetworkInstance& instance) {
  (void)instance;
  std::map<int, std::vector<RbId>> occurrences;
  for (const auto& [rb, users] : alloc.assignments)
    for (int k : users) occurrences[k].push_back(rb);

  ViolationReport report;
  for (const auto& [user, rbs] : occurrences) {
    if (rbs.size() < 2) continue;
    Violation v;
    v.constraint = Constraint::C1;
    v.user = user;
    v.rbs = rbs;
    v.detail = "user " + std::to_string(user) + " allocated to " +
               std::to_string(rbs.size()) + " RBs";
    report.violations.push_back(std::move(v));
  }
  return report;
}

/// Constraint 2: occupied RBs must not overlap in the spectrum. An occupied
/// RB counts its footprint once no matter how many users it holds.
inline ViolationReport check_c2(const Allocation& alloc, const RbGrid& grid) {
  std::array<int, kNumBasicRbs> load{};
  std::array<std::vector<RbId>, kNumBasicRbs> holders;
  for (const auto& [rb, users] : alloc.assignments) {
    if (users.empty()) continue;
    const Footprint fp = grid.overlap_vector(rb);
    for (int n = 0; n < kNumBasicRbs; ++n) {
      if (!fp.test(static_cast<std::size_t>(n))) continue;
      load[static_cast<std::size_t>(n)] += 1;
      holders[static_cast<std::size_t>(n)].push_back(rb);
    }
  }

  ViolationReport report;
  for (int n = 0; n < kNumBasicRbs; ++n) {
    if (load[static_cast<std::size_t>(n)] <= 1) continue;
    Violation v;
    v.constraint = Constraint::C2;
    v.position = n;
    v.rbs = holders[static_cast<std::size_t>(n)];
    std::string names;
    for (const auto& rb : v.rbs) names += (names.empty() ? "" : ", ") + rb.to_string();
    v.detail = "26-tone position " + std::to_string(n) + " covered by " + names;
    report.violations.push_back(std::move(v));
  }
  return report;
}

/// Constraint 3: per-RB user count within capacity (MU-MIMO above 52-tone).
inline ViolationReport check_c3(const Allocation& alloc, const NetworkInstance& instance) {
  ViolationReport report;
  for (const auto& [rb, users] : alloc.assignments) {
    const int cap = instance.grid.capacity(rb, instance.antennas);
    if (static_cast<int>(users.size()) <= cap) continue;
    Violation v;
    v.constraint = Constraint::C3;
    v.rbs = {rb};
    v.actual = static_cast<double>(users.size());
    v.required = static_cast<double>(cap);
    v.detail = rb.to_string() + " holds " + std::to_string(users.size()) +
               " users, capacity " + std::to_string(cap);
    report.violations.push_back(std::move(v));
  }
  return report;
}

/// QoS: an allocated user must reach its minimum rate on the RB it occupies,
/// judged on the theoretical rate with the actual co-scheduled set.
/// Unallocated users are exempt.
inline ViolationReport check_qos(const Allocation& alloc, const NetworkInstance& instance) {
  ViolationReport report;
  for (const auto& [rb, users] : alloc.assignments) {
    if (users.empty()) continue;
    CoScheduledSet coset{rb, {users.begin(), users.end()}};
    for (int k : users) {
      const double required = instance.users[static_cast<std::size_t>(k)].min_rate_bps;
      if (required <= 0.0) continue;
      const double rate = rb_rate(k, coset, instance);
      if (rate >= required) continue;
      Violation v;
      v.constraint = Constraint::QoS;
      v.user = k;
      v.rbs = {rb};
      v.actual = rate;
      v.required = required;
      v.detail = "user " + std::to_string(k) + " rate " + detail::format_mbps(rate) +
                 " Mbps below minimum " + detail::format_mbps(required) + " Mbps on " +
                 rb.to_string();
      report.violations.push_back(std::move(v));
    }
  }
  return report;
}

/// Theoretical rates for all allocated pairs plus queue-capped effective
/// rates for every user.
inline RateReport rate_report(const Allocation& alloc, const NetworkInstance& instance) {
  RateReport report;
  report.per_user_effective.assign(static_cast<std::size_t>(instance.user_count()), 0.0);

  std::vector<double> raw_sum(static_cast<std::size_t>(instance.user_count()), 0.0);
  for (const auto& [rb, users] : alloc.assignments) {
    if (users.empty()) continue;
    CoScheduledSet coset{rb, {users.begin(), users.end()}};
    for (int k : users) {
      const double r = rb_rate(k, coset, instance);
      report.per_user_rb_rate[{k, rb}] = r;
      raw_sum[static_cast<std::size_t>(k)] += r;
    }
  }
  for (int k = 0; k < instance.user_count(); ++k) {
    const double cap = instance.users[static_cast<std::size_t>(k)].queue_bits / instance.tx_time_s;
    report.per_user_effective[static_cast<std::size_t>(k)] =
        std::min(raw_sum[static_cast<std::size_t>(k)], cap);
  }
  return report;
}

inline double effective_rate(int user, const Allocation& alloc, const NetworkInstance& instance) {
  if (user < 0 || user >= instance.user_count())
    throw std::invalid_argument("unknown user index " + std::to_string(user));
  return rate_report(alloc, instance).per_user_effective[static_cast<std::size_t>(user)];
}

namespace detail {

inline double utility_from_effective(const std::vector<double>& effective_bps,
                                     UtilityKind kind) {
  double total = 0.0;
  for (double bps : effective_bps) {
    const double mbps = bps / 1e6;
    total += kind == UtilityKind::SumRate ? mbps : std::log1p(mbps);
  }
  return total;
}

}  // namespace detail

/// Utility over ALL users (unallocated ones contribute zero), in Mbps for
/// SumRate and ln(1 + Mbps) for proportional fairness.
inline double utility(const Allocation& alloc, const NetworkInstance& instance,
                      UtilityKind kind) {
  validate_structure(alloc, instance);
  return detail::utility_from_effective(rate_report(alloc, instance).per_user_effective, kind);
}

/// Full scoring pass: all four checks, rates and utility. Utility is computed
/// even when infeasible so the result can be used as optimizer feedback.
inline EvaluationResult evaluate(const Allocation& alloc, const NetworkInstance& instance,
                                 UtilityKind kind) {
  validate_structure(alloc, instance);
  EvaluationResult result;
  result.violations.append(check_c1(alloc, instance));
  result.violations.append(check_c2(alloc, instance.grid));
  result.violations.append(check_c3(alloc, instance));
  result.violations.append(check_qos(alloc, instance));
  result.rates = rate_report(alloc, instance);
  result.utility_value = detail::utility_from_effective(result.rates.per_user_effective, kind);
  result.feasible = result.violations.empty();
  return result;
}

/// Canonical text form: one line per occupied RB, RBs sorted by (level,
/// index), users ascending. `index_base` shifts user indices for rendering
/// (the optimizer exchanges 1-based text; everything internal is 0-based).
inline std::string to_canonical_text(const Allocation& alloc, int index_base = 0) {
  std::string out;
  for (const auto& [rb, users] : alloc.assignments) {
    if (users.empty()) continue;
    out += rb.to_string() + ": [";
    bool first = true;
    for (int k : users) {
      if (!first) out += ", ";
      out += std::to_string(k + index_base);
      first = false;
    }
    out += "]\n";
  }
  return out;
}

}  // namespace raforge
