#include "agentloom/metacog.hpp"

#include <sstream>

namespace agentloom::metacog {

std::optional<CycleFinding> detect_cycle(
    const std::vector<HistoryEntry>& entries, int window) {
  if (window < 2) throw PreconditionViolation("cycle window must be >= 2");
  const int n = static_cast<int>(entries.size());
  const int usable = std::min(n, window);
  for (int period = 1; period <= window / 2; ++period) {
    if (2 * period > usable) break;
    bool match = true;
    for (int i = 0; i < period && match; ++i) {
      const HistoryEntry& a = entries[n - 2 * period + i];
      const HistoryEntry& b = entries[n - period + i];
      match = a.state_fingerprint == b.state_fingerprint &&
              a.action_fingerprint == b.action_fingerprint;
    }
    if (match) {
      CycleFinding finding;
      finding.period = period;
      finding.occurrences = 2;
      finding.span_begin = n - 2 * period;
      finding.span_end = n - 1;
      return finding;
    }
  }
  return std::nullopt;
}

MetacogReport evaluate(const std::vector<HistoryEntry>& entries,
                       const Plan& plan, int window, int stagnation_k) {
  MetacogReport report;
  if (!entries.empty()) report.cycle = detect_cycle(entries, window);

  // Stagnation: trailing run of >= k entries sharing the active subgoal
  // with an unchanged state fingerprint.
  const Subgoal* active = plan.active();
  if (active && static_cast<int>(entries.size()) >= stagnation_k) {
    bool stagnant = true;
    const std::size_t n = entries.size();
    const std::uint64_t fp = entries[n - 1].state_fingerprint;
    for (int i = 0; i < stagnation_k; ++i) {
      const HistoryEntry& e = entries[n - 1 - i];
      if (e.subgoal_id != active->id || e.state_fingerprint != fp) {
        stagnant = false;
        break;
      }
    }
    report.stagnant = stagnant;
  }

  for (const auto& entry : entries) {
    if (!entry.ok) continue;
    const Subgoal* sg = plan.find(entry.subgoal_id);
    if (sg && sg->status == SubgoalStatus::kCompleted)
      report.completed_evidence.insert(entry.action_fingerprint);
  }
  return report;
}

std::uint64_t state_fingerprint(const DeviceState& state) {
  // Timestamp and seq deliberately excluded; otherwise no two states would
  // ever compare equal and "no progress" would be undetectable.
  std::uint64_t h = fnv1a64(state.screenshot_digest);
  return fnv1a64(state.focused_package, h);
}

std::uint64_t action_fingerprint(const ActionDecision& decision) {
  std::uint64_t h = fnv1a64(to_string(decision.kind));
  if (decision.target) h = fnv1a64(decision.target->canonical(), h);
  if (decision.payload) h = fnv1a64(*decision.payload, h);
  return h;
}

std::string render_report(const MetacogReport& report) {
  std::ostringstream os;
  if (report.cycle) {
    os << "cycle detected: period=" << report.cycle->period
       << " occurrences=" << report.cycle->occurrences << " span=["
       << report.cycle->span_begin << "," << report.cycle->span_end << "]\n";
  } else {
    os << "cycle: none\n";
  }
  os << "stagnant: " << (report.stagnant ? "true" : "false") << "\n";
  os << "completed_evidence: " << report.completed_evidence.size()
     << " action(s)";
  return os.str();
}

}  // namespace agentloom::metacog
