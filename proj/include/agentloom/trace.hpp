#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentloom/backend.hpp"

namespace agentloom {

// One record per node entry/exit; appended at node exit with both ordinals.
// Serialized as one JSON object per line (see docs/formats.md).
struct TraceRecord {
  std::string run_id;
  int cycle_index = 0;
  std::string node;
  std::uint64_t start_ordinal = 0;
  std::uint64_t end_ordinal = 0;
  std::string input_digest;
  std::string output_digest;
  std::optional<llm::TokenUsage> usage;
  std::string status = "ok";
  std::string detail;  // documented extension: seq, route, transition audit

  std::string to_line() const;
  static TraceRecord from_line(const std::string& line);
};

class TraceLog {
 public:
  TraceLog() = default;
  explicit TraceLog(std::string run_id) : run_id_(std::move(run_id)) {}

  const std::string& run_id() const { return run_id_; }
  std::uint64_t next_ordinal() { return ++ordinal_; }

  void append(TraceRecord record) { records_.push_back(std::move(record)); }
  const std::vector<TraceRecord>& records() const { return records_; }

  std::vector<std::string> to_lines() const;  // body records only
  std::string hash() const;                   // over body lines

  // Body plus a trailing run_end line carrying the body hash.
  std::string to_text() const;
  static TraceLog parse(const std::string& text);

  void write_file(const std::string& path) const;
  static TraceLog read_file(const std::string& path);

  // Count of route records == decision cycles used.
  int cycle_count() const;

 private:
  std::string run_id_;
  std::uint64_t ordinal_ = 0;
  std::vector<TraceRecord> records_;
};

// Per-agent, per-model token totals aggregated from backend-call records.
struct CostLedger {
  struct Cell {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
  };
  // agent -> model -> totals; ordered maps keep output deterministic
  std::map<std::string, std::map<std::string, Cell>> cells;

  void add(const std::string& agent, const llm::TokenUsage& usage);
  std::int64_t total_input() const;
  std::int64_t total_output() const;
  std::vector<llm::TokenUsage> flatten() const;

  static CostLedger from_trace(const TraceLog& trace);
  std::string to_text() const;
};

}  // namespace agentloom
