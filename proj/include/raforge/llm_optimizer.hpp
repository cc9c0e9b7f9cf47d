#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <regex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "raforge/allocation.hpp"
#include "raforge/errors.hpp"
#include "raforge/solvers.hpp"

namespace raforge {

// Prompt fragments shared between the renderer and the offline mock, which
// reads rendered prompts the same way a remote model would.
inline constexpr const char* kColdStartMarker = "No allocations have been scored yet.";
inline constexpr const char* kHistoryHeader =
    "History of proposed allocations and their scores (ascending, best last):";
inline constexpr const char* kSolutionMarker = "Solution:";
inline constexpr const char* kScoreMarker = "Score:";

namespace detail {

inline std::string format_double(const char* fmt, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, value);
  return std::string(buf);
}

}  // namespace detail

/// The task description sent to the proposal backend before any history.
struct MetaPrompt {
  std::string task_description;
  std::string user_info_block;
  std::string format_spec;

  std::string render() const {
    return task_description + "\n" + user_info_block + "\n" + format_spec;
  }
};

/// Allocation text in the exchange grammar (1-based user indices).
inline std::string render_allocation_text(const Allocation& alloc) {
  return to_canonical_text(alloc, 1);
}

/// Renders the task, environment data and output grammar. Deterministic for
/// a fixed instance: every number uses a fixed format, users appear in index
/// order, and the variable ranges are spelled out to keep the model inside
/// the valid index space.
inline MetaPrompt build_meta_prompt(const NetworkInstance& instance, UtilityKind kind,
                                    const std::string& scenario_label = "") {
  const int k = instance.user_count();
  MetaPrompt meta;

  std::string head;
  head += "You are optimizing uplink resource allocation in a 20 MHz IEEE 802.11ax network.\n";
  if (!scenario_label.empty()) head += "Setting: " + scenario_label + "\n";
  head += kind == UtilityKind::SumRate
              ? "Objective: maximize the total effective data rate, i.e. the sum over "
                "users of min(allocated rate, queue/T), in Mbps.\n"
              : "Objective: maximize proportional fairness, i.e. the sum over users of "
                "ln(1 + effective rate in Mbps).\n";
  head +=
      "The channel has 16 resource blocks (RBs) on 4 levels:\n"
      "  level 0: nine 26-tone RBs (indices 0-8), 1.875 MHz each, covering 26-tone "
      "positions 0..8 one apiece\n"
      "  level 1: four 52-tone RBs (indices 0-3), 3.75 MHz each, covering positions "
      "{0,1}, {2,3}, {5,6}, {7,8}\n"
      "  level 2: two 106-tone RBs (indices 0-1), 7.96875 MHz each, covering positions "
      "{0,1,2,3} and {5,6,7,8}\n"
      "  level 3: one 242-tone RB (index 0), 18.28125 MHz, covering all positions 0-8\n"
      "Rules:\n"
      "  1. Each user may appear on at most one RB.\n"
      "  2. Used RBs must not cover any 26-tone position more than once.\n"
      "  3. RBs at levels 0 and 1 carry at most 1 user; RBs at levels 2 and 3 carry at "
      "most " +
      std::to_string(instance.antennas) +
      " users (MU-MIMO).\n"
      "  4. Every allocated user must reach their minimum rate on the RB they occupy.\n";
  head += "Access point antennas: " + std::to_string(instance.antennas) +
          ". Transmission time T = " +
          detail::format_double("%.6g", instance.tx_time_s * 1e3) + " ms.\n";
  head += "Variable ranges: user indices (1-" + std::to_string(k) +
          "), RB levels (0-3), RB indices as listed per level.\n";
  meta.task_description = std::move(head);

  std::string users;
  users += "Per-user link data (singleton SNR in dB on each of the nine level-0 RBs):\n";
  for (int u = 0; u < k; ++u) {
    const auto& user = instance.users[static_cast<std::size_t>(u)];
    users += "user " + std::to_string(u + 1) + ": SNR = [";
    for (int ru = 0; ru < kNumBasicRbs; ++ru) {
      const double gamma = sinr(u, CoScheduledSet{RbId{0, ru}, {u}}, instance);
      users += (ru ? ", " : "");
      users += gamma > 0.0 ? detail::format_double("%.1f", 10.0 * std::log10(gamma))
                           : std::string("-inf");
    }
    users += "] dB, queue = ";
    users += std::isinf(user.queue_bits)
                 ? std::string("unlimited")
                 : detail::format_double("%.0f", user.queue_bits) + " bits";
    users += ", min rate = " + detail::format_double("%.1f", user.min_rate_bps / 1e6) +
             " Mbps\n";
  }
  meta.user_info_block = std::move(users);

  meta.format_spec =
      "Output format: one line per used RB, exactly `RB(level,index): [u1, u2, ...]` "
      "with user indices ascending.\n"
      "Example: RB(2,0): [1, 4]\n"
      "Do not repeat an RB line. Reply with RB lines only.\n";
  return meta;
}

// --- Solution grammar --------------------------------------------------------

enum class ParseErrorKind { Malformed, OutOfRangeUser, OutOfRangeRb, DuplicateRb };

struct ParseError {
  ParseErrorKind kind = ParseErrorKind::Malformed;
  std::string token;

  std::string message() const {
    switch (kind) {
      case ParseErrorKind::Malformed:
        return "malformed output near \"" + token + "\"";
      case ParseErrorKind::OutOfRangeUser:
        return "non-existent user index " + token;
      case ParseErrorKind::OutOfRangeRb:
        return "non-existent resource block " + token;
      case ParseErrorKind::DuplicateRb:
        return "duplicate line for " + token;
    }
    return "parse error";
  }
};

using ParseResult = std::variant<Allocation, ParseError>;

/// Parses backend output in the exchange grammar. Lines that do not match
/// the `RB(l,i): [...]` shape are ignored as prose, but if no line matches
/// the whole text is malformed. User indices are 1-based on the wire and
/// 0-based in the returned allocation; out-of-range users or RBs and
/// repeated RB lines are structured errors. Constraint violations (a user on
/// two RBs, too many users on one RB) are NOT parse errors; they parse fine
/// and get rejected by scoring, so they can be fed back as negative examples.
inline ParseResult parse_solution(const std::string& text, int user_count) {
  static const std::regex line_re(
      R"(^\s*RB\s*\(\s*(\d{1,6})\s*,\s*(\d{1,6})\s*\)\s*:\s*\[([^\]]*)\]\s*$)");
  static const std::regex user_re(R"(^\s*(\d{1,7})\s*$)");

  Allocation alloc;
  std::vector<RbId> seen;
  bool matched_any = false;
  std::string first_line;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string line =
        text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;

    if (first_line.empty() && line.find_first_not_of(" \t\r") != std::string::npos)
      first_line = line.substr(0, 80);

    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    matched_any = true;

    const RbId rb{std::stoi(m[1].str()), std::stoi(m[2].str())};
    if (rb.level >= RbGrid::level_count() || rb.index >= RbGrid::level_size(rb.level))
      return ParseError{ParseErrorKind::OutOfRangeRb, rb.to_string()};
    if (std::find(seen.begin(), seen.end(), rb) != seen.end())
      return ParseError{ParseErrorKind::DuplicateRb, rb.to_string()};
    seen.push_back(rb);

    // split the bracket body on commas
    const std::string body = m[3].str();
    std::size_t start = 0;
    while (start <= body.size()) {
      const std::size_t comma = body.find(',', start);
      const std::string token =
          body.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      start = comma == std::string::npos ? body.size() + 1 : comma + 1;
      if (token.find_first_not_of(" \t") == std::string::npos) {
        if (body.find_first_not_of(" \t") == std::string::npos) break;  // empty list "[]"
        return ParseError{ParseErrorKind::Malformed, "[" + body + "]"};
      }
      std::smatch um;
      if (!std::regex_match(token, um, user_re))
        return ParseError{ParseErrorKind::Malformed, token};
      const long wire = std::stol(um[1].str());
      if (wire < 1 || wire > user_count)
        return ParseError{ParseErrorKind::OutOfRangeUser, std::to_string(wire)};
      alloc.add(rb, static_cast<int>(wire - 1));
    }
  }

  if (!matched_any) return ParseError{ParseErrorKind::Malformed, first_line};
  return alloc;
}

// --- Scored records and history ----------------------------------------------

/// One scored candidate as it appears in the optimization history.
struct SolutionRecord {
  std::string allocation_text;  // exchange grammar (1-based)
  double utility = 0.0;
  bool feasible = false;
  std::vector<std::string> violations;
  int step = 0;
};

namespace detail {

/// Violation rendered for the backend: user indices shifted to 1-based to
/// match the prompt convention.
inline std::string violation_for_prompt(const Violation& v) {
  switch (v.constraint) {
    case Constraint::C1:
      return "user " + std::to_string(v.user + 1) + " allocated to " +
             std::to_string(v.rbs.size()) + " RBs, at most one allowed";
    case Constraint::C2: {
      std::string names;
      for (const auto& rb : v.rbs) names += (names.empty() ? "" : " and ") + rb.to_string();
      return names + " overlap at 26-tone position " + std::to_string(v.position);
    }
    case Constraint::C3:
      return v.rbs.front().to_string() + " holds " +
             std::to_string(static_cast<int>(v.actual)) + " users, capacity " +
             std::to_string(static_cast<int>(v.required));
    case Constraint::QoS:
      return "user " + std::to_string(v.user + 1) + " rate " + format_mbps(v.actual) +
             " Mbps below minimum " + format_mbps(v.required) + " Mbps on " +
             v.rbs.front().to_string();
  }
  return "constraint violation";
}

}  // namespace detail

/// Evaluates a parsed candidate and packages score plus violation feedback.
inline SolutionRecord score_candidate(const Allocation& alloc, const NetworkInstance& instance,
                                      UtilityKind kind, int step) {
  const EvaluationResult eval = evaluate(alloc, instance, kind);
  SolutionRecord record;
  record.allocation_text = render_allocation_text(alloc);
  record.utility = eval.utility_value;
  record.feasible = eval.feasible;
  record.step = step;
  for (const auto& v : eval.violations.violations)
    record.violations.push_back(std::string(constraint_name(v.constraint)) + ": " +
                                detail::violation_for_prompt(v));
  return record;
}

/// Sampled feedback window: the top feasible records by utility plus a few
/// recent infeasible exemplars with distinct violation signatures, so
/// negative feedback stays in the prompt without crowding out progress.
struct HistoryWindow {
  int capacity = 20;
  int infeasible_slots = 4;
  std::vector<SolutionRecord> feasible;    // ascending utility, best last
  std::vector<SolutionRecord> infeasible;  // ascending step

  int size() const {
    return static_cast<int>(feasible.size() + infeasible.size());
  }

  const SolutionRecord* best() const {
    return feasible.empty() ? nullptr : &feasible.back();
  }
};

inline HistoryWindow update_history(HistoryWindow window,
                                    const std::vector<SolutionRecord>& new_records) {
  std::vector<SolutionRecord> merged = window.feasible;
  merged.insert(merged.end(), window.infeasible.begin(), window.infeasible.end());
  merged.insert(merged.end(), new_records.begin(), new_records.end());

  // dedupe by allocation text, first occurrence wins
  std::vector<SolutionRecord> unique;
  std::set<std::string> texts;
  for (auto& rec : merged)
    if (texts.insert(rec.allocation_text).second) unique.push_back(std::move(rec));

  std::vector<SolutionRecord> feasible;
  std::vector<SolutionRecord> infeasible;
  for (auto& rec : unique)
    (rec.feasible ? feasible : infeasible).push_back(std::move(rec));

  std::sort(feasible.begin(), feasible.end(), [](const auto& a, const auto& b) {
    if (a.utility != b.utility) return a.utility < b.utility;
    if (a.step != b.step) return a.step < b.step;
    return a.allocation_text < b.allocation_text;
  });
  const std::size_t keep =
      static_cast<std::size_t>(std::max(0, window.capacity - window.infeasible_slots));
  if (feasible.size() > keep)
    feasible.erase(feasible.begin(), feasible.end() - static_cast<long>(keep));

  // most recent exemplar per violation signature
  std::map<std::string, SolutionRecord> by_signature;
  for (auto& rec : infeasible) {
    std::string signature;
    for (const auto& v : rec.violations) signature += v + "\n";
    auto it = by_signature.find(signature);
    if (it == by_signature.end() || rec.step > it->second.step)
      by_signature.insert_or_assign(std::move(signature), std::move(rec));
  }
  std::vector<SolutionRecord> exemplars;
  for (auto& [sig, rec] : by_signature) exemplars.push_back(std::move(rec));
  std::sort(exemplars.begin(), exemplars.end(),
            [](const auto& a, const auto& b) { return a.step < b.step; });
  if (static_cast<int>(exemplars.size()) > window.infeasible_slots)
    exemplars.erase(exemplars.begin(),
                    exemplars.end() - window.infeasible_slots);

  window.feasible = std::move(feasible);
  window.infeasible = std::move(exemplars);
  return window;
}

/// Meta-prompt plus rendered history plus the next-step instruction.
inline std::string render_step_prompt(const MetaPrompt& meta, const HistoryWindow& window) {
  std::string prompt = meta.render();
  prompt += "\n";
  if (window.size() == 0) {
    prompt += kColdStartMarker;
    prompt += "\nPropose an initial allocation in the output format. Reply with RB lines only.\n";
    return prompt;
  }
  prompt += kHistoryHeader;
  prompt += "\n";
  auto render_record = [&](const SolutionRecord& rec) {
    prompt += kSolutionMarker;
    prompt += "\n";
    prompt += rec.allocation_text.empty() ? "(empty allocation)\n" : rec.allocation_text;
    prompt += kScoreMarker;
    prompt += " " + detail::format_double("%.4f", rec.utility);
    if (rec.feasible) {
      prompt += " (feasible)\n";
    } else {
      prompt += " (INFEASIBLE: ";
      for (std::size_t i = 0; i < rec.violations.size(); ++i)
        prompt += (i ? "; " : "") + rec.violations[i];
      prompt += ")\n";
    }
  };
  for (const auto& rec : window.feasible) render_record(rec);
  for (const auto& rec : window.infeasible) render_record(rec);
  prompt +=
      "Propose a new allocation, different from every solution above, with a strictly "
      "higher score. Reply with RB lines only.\n";
  return prompt;
}

// --- Proposal backends ---------------------------------------------------------

/// Anything that can turn a rendered prompt into candidate solution texts.
/// Implementations may return fewer than `count` texts and may return
/// malformed text; the parser copes.
class ProposalBackend {
 public:
  virtual ~ProposalBackend() = default;
  virtual std::vector<std::string> propose(const std::string& prompt, int count, Rng& rng) = 0;
  virtual std::string name() const = 0;
};

/// Offline stand-in for the LLM server: reads the rendered prompt like a
/// model would, seeds cold starts with the round-robin solution, and
/// otherwise hill-climbs by one-edit mutations of the best feasible record.
class MockBackend : public ProposalBackend {
 public:
  explicit MockBackend(const NetworkInstance& instance) : instance_(&instance) {}

  std::string name() const override { return "llm-mock"; }

  std::vector<std::string> propose(const std::string& prompt, int count, Rng& rng) override {
    std::vector<std::string> out;
    if (count <= 0) return out;

    Allocation parent;
    bool have_parent = false;
    if (prompt.find(kColdStartMarker) == std::string::npos) {
      const std::string block = best_feasible_block(prompt);
      if (!block.empty()) {
        auto parsed = parse_solution(block, instance_->user_count());
        if (auto* alloc = std::get_if<Allocation>(&parsed)) {
          parent = std::move(*alloc);
          have_parent = true;
        }
      }
    }

    if (!have_parent) {
      out.push_back(render_allocation_text(round_robin(*instance_)));
      while (static_cast<int>(out.size()) < count)
        out.push_back(render_allocation_text(random_allocation(*instance_, rng)));
      return out;
    }
    for (int i = 0; i < count; ++i)
      out.push_back(render_allocation_text(mutate(parent, rng)));
    return out;
  }

  /// Single-edit mutation: add one user, drop one user, or retarget one
  /// occupied RB to a free one. Exactly one RB entry changes.
  Allocation mutate(const Allocation& parent, Rng& rng) const {
    const int users = instance_->user_count();
    std::vector<int> unallocated;
    std::vector<std::pair<RbId, int>> placed;
    for (int k = 0; k < users; ++k) {
      bool found = false;
      for (const auto& [rb, members] : parent.assignments)
        if (members.count(k)) {
          placed.emplace_back(rb, k);
          found = true;
        }
      if (!found) unallocated.push_back(k);
    }

    std::vector<int> ops;
    if (!unallocated.empty()) ops.push_back(0);            // add
    if (!placed.empty()) ops.push_back(1);                 // drop
    if (!parent.assignments.empty()) ops.push_back(2);     // retarget
    if (ops.empty()) return random_allocation(*instance_, rng);

    Allocation child = parent;
    switch (ops[static_cast<std::size_t>(rng.uniform_index(static_cast<int>(ops.size())))]) {
      case 0: {
        const int user = unallocated[static_cast<std::size_t>(
            rng.uniform_index(static_cast<int>(unallocated.size())))];
        child.add(pick_add_rb(parent, rng), user);
        break;
      }
      case 1: {
        const auto& [rb, user] = placed[static_cast<std::size_t>(
            rng.uniform_index(static_cast<int>(placed.size())))];
        child.assignments[rb].erase(user);
        if (child.assignments[rb].empty()) child.assignments.erase(rb);
        break;
      }
      default: {
        auto it = child.assignments.begin();
        std::advance(it, rng.uniform_index(static_cast<int>(child.assignments.size())));
        std::vector<RbId> candidates;
        for (const auto& info : instance_->grid.all())
          if (!child.assignments.count(info.id)) candidates.push_back(info.id);
        if (candidates.empty()) break;
        const RbId target = candidates[static_cast<std::size_t>(
            rng.uniform_index(static_cast<int>(candidates.size())))];
        auto users_set = std::move(it->second);
        child.assignments.erase(it);
        child.assignments[target] = std::move(users_set);
        break;
      }
    }
    return child;
  }

 private:
  /// Prefers RBs whose footprint stays disjoint and whose capacity has room,
  /// falling back to any RB (the proposal may then be infeasible, which is a
  /// useful negative example).
  RbId pick_add_rb(const Allocation& parent, Rng& rng) const {
    Footprint occupied;
    for (const auto& [rb, members] : parent.assignments)
      if (!members.empty()) occupied |= instance_->grid.overlap_vector(rb);
    std::vector<RbId> good;
    for (const auto& info : instance_->grid.all()) {
      const auto it = parent.assignments.find(info.id);
      const int load = it == parent.assignments.end() ? 0 : static_cast<int>(it->second.size());
      const bool fits_capacity = load < instance_->grid.capacity(info.id, instance_->antennas);
      const bool fits_spectrum =
          load > 0 || (info.footprint & occupied).none();
      if (fits_capacity && fits_spectrum) good.push_back(info.id);
    }
    if (!good.empty())
      return good[static_cast<std::size_t>(rng.uniform_index(static_cast<int>(good.size())))];
    return instance_->grid.all()[static_cast<std::size_t>(
        rng.uniform_index(instance_->grid.size()))].id;
  }

  /// Last feasible <solution, score> block in the rendered prompt; history is
  /// ascending, so the last one is the best.
  static std::string best_feasible_block(const std::string& prompt) {
    std::string best;
    std::string current;
    bool in_block = false;
    std::size_t pos = 0;
    while (pos <= prompt.size()) {
      const std::size_t eol = prompt.find('\n', pos);
      const std::string line =
          prompt.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
      pos = eol == std::string::npos ? prompt.size() + 1 : eol + 1;
      if (line == kSolutionMarker) {
        in_block = true;
        current.clear();
        continue;
      }
      if (!in_block) continue;
      if (line.rfind(kScoreMarker, 0) == 0) {
        if (line.find("(feasible)") != std::string::npos) best = current;
        in_block = false;
        continue;
      }
      current += line + "\n";
    }
    return best;
  }

  const NetworkInstance* instance_;
};

inline std::unique_ptr<ProposalBackend> mock_backend(const NetworkInstance& instance) {
  return std::make_unique<MockBackend>(instance);
}

// --- Closed loop ---------------------------------------------------------------

struct OptimizeSettings {
  int max_steps = 30;
  int candidates_per_step = 8;
  int patience = 8;  // consecutive non-improving steps before stopping
  int history_capacity = 20;
  int infeasible_slots = 4;
  std::string session_log_path;  // JSON-lines replay log, empty = off

  void validate() const {
    if (max_steps < 1 || candidates_per_step < 1 || patience < 1)
      throw ConfigError("OptimizeSettings: max_steps, candidates_per_step and patience must be >= 1");
  }
};

struct OptimizeResult {
  Allocation allocation;
  EvaluationResult evaluation;
  std::vector<std::pair<int, double>> trace;  // (step, best utility so far)
  bool aborted = false;                       // transport failure cut the run short
  int steps = 0;
};

/// The refinement loop: render prompt, collect proposals, score them, fold
/// the feedback into the history, repeat. Stops on the step budget or after
/// `patience` steps without improving the best feasible score. The returned
/// allocation is always feasible (the empty allocation is the fallback).
inline OptimizeResult optimize(const NetworkInstance& instance, UtilityKind kind,
                               ProposalBackend& backend, const OptimizeSettings& settings,
                               Rng& rng) {
  settings.validate();
  const MetaPrompt meta = build_meta_prompt(instance, kind);
  HistoryWindow window;
  window.capacity = settings.history_capacity;
  window.infeasible_slots = settings.infeasible_slots;

  OptimizeResult result;
  result.allocation = Allocation{};
  result.evaluation = evaluate(result.allocation, instance, kind);
  double best_utility = result.evaluation.utility_value;

  std::ofstream log;
  if (!settings.session_log_path.empty()) {
    log.open(settings.session_log_path);
    if (!log) throw ConfigError("cannot open session log " + settings.session_log_path);
  }

  int stale_steps = 0;
  for (int step = 1; step <= settings.max_steps; ++step) {
    const std::string prompt = render_step_prompt(meta, window);
    const std::uint64_t prompt_hash = fnv1a(prompt);

    std::vector<std::string> texts;
    try {
      texts = backend.propose(prompt, settings.candidates_per_step, rng);
    } catch (const TransportError&) {
      result.aborted = true;
      break;
    }

    bool improved = false;
    std::vector<SolutionRecord> records;
    for (const auto& text : texts) {
      SolutionRecord record;
      ParseResult parsed = parse_solution(text, instance.user_count());
      if (auto* error = std::get_if<ParseError>(&parsed)) {
        record.allocation_text = text.substr(0, 400);
        record.feasible = false;
        record.step = step;
        record.violations = {"parse error: " + error->message()};
      } else {
        const Allocation& alloc = std::get<Allocation>(parsed);
        record = score_candidate(alloc, instance, kind, step);
        if (record.feasible && record.utility > best_utility) {
          best_utility = record.utility;
          result.allocation = alloc;
          improved = true;
        }
      }
      if (log.is_open()) {
        nlohmann::json line;
        line["step"] = record.step;
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(prompt_hash));
        line["prompt_hash"] = hex;
        line["allocation"] = record.allocation_text;
        line["utility"] = record.utility;
        line["feasible"] = record.feasible;
        line["violations"] = record.violations;
        log << line.dump() << "\n";
      }
      records.push_back(std::move(record));
    }

    window = update_history(std::move(window), records);
    result.trace.emplace_back(step, best_utility);
    result.steps = step;

    stale_steps = improved ? 0 : stale_steps + 1;
    if (stale_steps >= settings.patience) break;
  }

  result.evaluation = evaluate(result.allocation, instance, kind);
  return result;
}

}  // namespace raforge
