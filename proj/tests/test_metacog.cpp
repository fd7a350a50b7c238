#include "doctest.h"

#include <random>

#include "agentloom/metacog.hpp"

using namespace agentloom;
using metacog::HistoryEntry;

namespace {

HistoryEntry entry(std::uint64_t state, std::uint64_t action,
                   const std::string& sg = "sg1", bool ok = true,
                   int cycle = 0) {
  return {cycle, state, action, sg, ok};
}

// Independent period search used as the test oracle: collect every period
// whose trailing halves match, then take the smallest.
std::optional<int> brute_period(const std::vector<HistoryEntry>& entries,
                                int window) {
  const int n = static_cast<int>(entries.size());
  const int usable = std::min(n, window);
  std::vector<int> hits;
  for (int p = window / 2; p >= 1; --p) {
    if (2 * p > usable) continue;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> first, second;
    for (int i = 0; i < p; ++i) {
      first.emplace_back(entries[n - 2 * p + i].state_fingerprint,
                         entries[n - 2 * p + i].action_fingerprint);
      second.emplace_back(entries[n - p + i].state_fingerprint,
                          entries[n - p + i].action_fingerprint);
    }
    if (first == second) hits.push_back(p);
  }
  if (hits.empty()) return std::nullopt;
  return *std::min_element(hits.begin(), hits.end());
}

}  // namespace

TEST_CASE("detect_cycle finds the smallest trailing period") {
  // [(s1,a),(s2,b),(s1,a),(s2,b)] repeats with period 2.
  std::vector<HistoryEntry> entries = {entry(1, 10), entry(2, 11),
                                       entry(1, 10), entry(2, 11)};
  auto finding = metacog::detect_cycle(entries, 8);
  REQUIRE(finding.has_value());
  CHECK(finding->period == 2);
  CHECK(finding->occurrences == 2);
  CHECK(finding->span_begin == 0);
  CHECK(finding->span_end == 3);
}

TEST_CASE("distinct states never report a cycle") {
  std::vector<HistoryEntry> entries;
  for (int i = 0; i < 8; ++i) entries.push_back(entry(100 + i, 7));
  CHECK_FALSE(metacog::detect_cycle(entries, 8).has_value());
}

TEST_CASE("a progressing scroll is not a cycle") {
  // Same swipe action, advancing state fingerprints: a list being scrolled.
  std::vector<HistoryEntry> entries;
  for (int i = 0; i < 6; ++i) entries.push_back(entry(1000 + i, 42));
  CHECK_FALSE(metacog::detect_cycle(entries, 8).has_value());
  CHECK(brute_period(entries, 8) == std::nullopt);
}

TEST_CASE("window precondition") {
  std::vector<HistoryEntry> entries = {entry(1, 1)};
  CHECK_THROWS_AS(metacog::detect_cycle(entries, 1), PreconditionViolation);
}

TEST_CASE("oracle agreement on random histories up to length 12") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20000; ++trial) {
    int n = static_cast<int>(rng() % 13);
    std::vector<HistoryEntry> entries;
    for (int i = 0; i < n; ++i)
      entries.push_back(entry(rng() % 3, rng() % 3));
    auto got = entries.empty() ? std::nullopt
                               : metacog::detect_cycle(entries, 8);
    auto want = entries.empty() ? std::nullopt : brute_period(entries, 8);
    if (want.has_value()) {
      REQUIRE(got.has_value());
      CHECK(got->period == *want);
    } else {
      CHECK_FALSE(got.has_value());
    }
  }
}

TEST_CASE("no false negatives for constructed trailing repetitions") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    int period = 1 + static_cast<int>(rng() % 4);  // p <= window/2
    std::vector<HistoryEntry> entries;
    int prefix = static_cast<int>(rng() % 4);
    for (int i = 0; i < prefix; ++i)
      entries.push_back(entry(50 + rng() % 100, rng() % 100));
    std::vector<std::pair<int, int>> block;
    for (int i = 0; i < period; ++i)
      block.emplace_back(static_cast<int>(rng() % 3),
                         static_cast<int>(rng() % 3));
    for (int rep = 0; rep < 2; ++rep)
      for (auto& [s, a] : block) entries.push_back(entry(s, a));
    auto finding = metacog::detect_cycle(entries, 8);
    REQUIRE(finding.has_value());
    CHECK(finding->period <= period);
  }
}

TEST_CASE("evaluate: stagnation and completed evidence") {
  Plan plan;
  plan.subgoals = {{"sg1", "done work", SubgoalStatus::kCompleted},
                   {"sg2", "current", SubgoalStatus::kInProgress}};

  SUBCASE("empty history") {
    auto report = metacog::evaluate({}, plan, 8);
    CHECK_FALSE(report.cycle.has_value());
    CHECK_FALSE(report.stagnant);
    CHECK(report.completed_evidence.empty());
  }
  SUBCASE("four identical-state entries on the active subgoal stagnate") {
    std::vector<HistoryEntry> entries;
    for (int i = 0; i < 4; ++i)
      entries.push_back(entry(5, 100 + i, "sg2"));  // different actions
    auto report = metacog::evaluate(entries, plan, 8, 4);
    CHECK(report.stagnant);
    // Three entries are not enough.
    entries.pop_back();
    CHECK_FALSE(metacog::evaluate(entries, plan, 8, 4).stagnant);
  }
  SUBCASE("ok actions under completed subgoals accumulate as evidence") {
    std::vector<HistoryEntry> entries = {entry(1, 11, "sg1", true),
                                         entry(2, 12, "sg1", false),
                                         entry(3, 13, "sg2", true)};
    auto report = metacog::evaluate(entries, plan, 8);
    CHECK(report.completed_evidence == std::set<std::uint64_t>{11});
  }
  SUBCASE("evidence never shrinks as entries grow") {
    std::vector<HistoryEntry> entries;
    std::mt19937_64 rng(3);
    std::set<std::uint64_t> previous;
    for (int i = 0; i < 60; ++i) {
      entries.push_back(entry(rng() % 4, rng() % 6,
                              (rng() % 2) ? "sg1" : "sg2", rng() % 2 == 0));
      auto report = metacog::evaluate(entries, plan, 8);
      CHECK(std::includes(report.completed_evidence.begin(),
                          report.completed_evidence.end(), previous.begin(),
                          previous.end()));
      previous = report.completed_evidence;
    }
  }
}

TEST_CASE("fingerprints ignore timestamp and seq") {
  DeviceState a;
  a.screenshot_digest = "abc";
  a.focused_package = "pkg";
  a.timestamp = "2026-01-01T00:00:01Z";
  a.seq = 5;
  DeviceState b = a;
  b.timestamp = "2026-01-01T09:00:00Z";
  b.seq = 99;
  CHECK(metacog::state_fingerprint(a) == metacog::state_fingerprint(b));
  b.screenshot_digest = "def";
  CHECK(metacog::state_fingerprint(a) != metacog::state_fingerprint(b));
}
