#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agentloom/domain.hpp"

namespace agentloom::metacog {

// One entry per executed action decision. The `ok` flag records the
// ActionResult outcome; completed-action evidence needs it.
struct HistoryEntry {
  int cycle_index = 0;
  std::uint64_t state_fingerprint = 0;   // hash of (screenshot_digest, package)
  std::uint64_t action_fingerprint = 0;  // hash of (kind, selector, payload)
  std::string subgoal_id;
  bool ok = true;
};

struct CycleFinding {
  int period = 0;       // >= 1
  int occurrences = 0;  // >= 2
  int span_begin = 0;   // index range of the repeated block, inclusive
  int span_end = 0;
};

struct MetacogReport {
  std::optional<CycleFinding> cycle;
  bool stagnant = false;
  std::set<std::uint64_t> completed_evidence;

  bool warning() const { return cycle.has_value() || stagnant; }
};

inline constexpr int kDefaultWindow = 8;
inline constexpr int kDefaultStagnationK = 4;

// Examines the trailing `window` entries. Reports the smallest period
// p <= window/2 such that the trailing 2p entries are the same
// (state, action) sequence repeated twice; otherwise nothing. A repeat with
// identical state fingerprints means the actions made no progress.
// Precondition: window >= 2.
std::optional<CycleFinding> detect_cycle(const std::vector<HistoryEntry>& entries,
                                         int window);

// Cycle detection plus stagnation (>= k trailing entries on the active
// subgoal with an unchanged state fingerprint) plus completed-action
// evidence (fingerprints of Ok actions under Completed subgoals).
MetacogReport evaluate(const std::vector<HistoryEntry>& entries,
                       const Plan& plan, int window,
                       int stagnation_k = kDefaultStagnationK);

std::uint64_t state_fingerprint(const DeviceState& state);
std::uint64_t action_fingerprint(const ActionDecision& decision);

// Text block injected into the Cortex prompt.
std::string render_report(const MetacogReport& report);

}  // namespace agentloom::metacog
