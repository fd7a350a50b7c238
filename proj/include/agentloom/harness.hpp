#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentloom/engine.hpp"
#include "agentloom/flags.hpp"
#include "agentloom/oracle.hpp"
#include "agentloom/sim_device.hpp"
#include "agentloom/trace.hpp"
#include "agentloom/util.hpp"

namespace agentloom::harness {

// ---------------------------------------------------------------------------
// Task suites
// ---------------------------------------------------------------------------

struct PredicateSpec {
  std::string name;  // field_equals | record_exists | screen_is | note_equals
  std::map<std::string, std::string> params;
  std::vector<std::map<std::string, std::string>> records;  // record_exists
  std::optional<int> total;                                 // record_exists
};

struct TaskSpec {
  std::string id;
  std::string goal;
  std::string preset = "home_default";
  PredicateSpec predicate;
  std::vector<std::string> tags;
  int step_budget = 16;
  std::string app_lock;
  std::string output_schema;

  bool has_tag(const std::string& tag) const;
};

// One JSON object per line; see docs/formats.md.
std::vector<TaskSpec> load_suite(const std::string& path);
std::string suite_to_lines(const std::vector<TaskSpec>& suite);

struct UnknownPredicate : std::runtime_error {
  explicit UnknownPredicate(const std::string& name)
      : std::runtime_error("unknown success predicate: " + name) {}
};

// Pure boolean over final device data (and the run's note dump).
bool check_success(const PredicateSpec& predicate, const sim::WorldView& world,
                   const std::vector<std::pair<std::string, std::string>>& notes);

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

enum class BackendKind { kScripted, kLive, kOracle };
BackendKind backend_kind_from_string(const std::string& name);
const char* to_string(BackendKind kind);

struct SuiteRunConfig {
  std::string assets_dir;
  AblationFlags flags;
  std::string fault_profile = "none";
  std::uint64_t seed = 1;
  BackendKind backend = BackendKind::kOracle;
  std::string fixtures_dir;  // scriptbook directory, required for kScripted
  llm::ModelAssignment models;
  int jobs = 1;
  std::string out_dir;  // when set, per-task trace files are written here
  engine::RunParams engine_params;
};

struct TaskResult {
  std::string id;
  bool success = false;
  int cycles = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::string error;
  std::string trace_hash;
};

struct SuiteReport {
  std::string suite_name;
  std::uint64_t seed = 0;
  std::string flags_summary;
  std::string fault_profile;
  std::string backend;
  std::vector<TaskResult> rows;
  std::int64_t total_input_tokens = 0;
  std::int64_t total_output_tokens = 0;
  // Per-model token totals across the suite, for cost analysis.
  std::map<std::string, CostLedger::Cell> model_totals;

  int tasks() const { return static_cast<int>(rows.size()); }
  int successes() const;
  // Undefined (nullopt) for an empty suite.
  std::optional<double> success_rate() const;

  std::string to_text() const;
  std::string to_records() const;
  static SuiteReport from_records(const std::string& text);
};

struct TaskRunOutput {
  TaskResult row;
  engine::RunResult run;
  sim::WorldView world;
};

// Runs one task on a fresh isolated device. The per-task device seed is
// mix_seed(config.seed, spec.id), so task order never matters.
TaskRunOutput run_task_spec(const TaskSpec& spec, const SuiteRunConfig& config,
                            llm::LlmBackend& backend);

// Per-task errors are recorded in the row; they never abort the suite.
SuiteReport run_suite(const std::vector<TaskSpec>& suite,
                      const SuiteRunConfig& config,
                      const std::string& suite_name = "suite");

// Generates the scriptbook for a suite by running it against the
// deterministic oracle and collecting every response.
llm::ScriptBook generate_scriptbook(const std::vector<TaskSpec>& suite,
                                    const SuiteRunConfig& config);

// ---------------------------------------------------------------------------
// Ablation sweep
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string component;  // "" = full system
  SuiteReport report;
  double delta_sr = 0.0;  // vs full system, in percentage points
};

struct AblationReport {
  std::vector<AblationRow> rows;  // full system first
  std::string to_text() const;
  std::string to_records() const;
};

// One run_suite per single-component-off configuration plus the full
// system. Components must name AblationFlags members.
AblationReport ablation_sweep(const std::vector<TaskSpec>& suite,
                              const std::vector<std::string>& components,
                              const SuiteRunConfig& config);

// ---------------------------------------------------------------------------
// Pricing and Pareto analysis
// ---------------------------------------------------------------------------

struct UnpricedModel : std::runtime_error {
  explicit UnpricedModel(const std::string& model)
      : std::runtime_error("no pricing for model: " + model) {}
};

struct PricingTable {
  struct Rate {
    NanoUsd input_per_million = 0;
    NanoUsd output_per_million = 0;
  };
  std::map<std::string, Rate> rates;

  static PricingTable load_file(const std::string& path);
  static PricingTable parse(const std::string& json_text);
};

// Exact nanodollar arithmetic: sum of tokens/1e6 * rate over all usages.
NanoUsd compute_cost(const std::vector<llm::TokenUsage>& usages,
                     const PricingTable& pricing);

struct ConfigPoint {
  std::string name;
  double success_rate = 0.0;  // fraction in [0,1]
  NanoUsd cost = 0;           // USD per task, nanodollars
};

std::vector<ConfigPoint> load_config_points(const std::string& path);

// q dominates p iff q.sr >= p.sr and q.cost <= p.cost with at least one
// strict. Returns all non-dominated points in input order; ties kept.
std::vector<ConfigPoint> pareto_frontier(const std::vector<ConfigPoint>& points);

// ---------------------------------------------------------------------------
// Trace replay
// ---------------------------------------------------------------------------

struct ReplayResult {
  bool match = false;
  int first_mismatch = -1;  // 1-based record number, -1 when matching
  std::string message;
};

// Re-executes the run described by the trace header with the same scripted
// inputs and compares the produced records line by line.
ReplayResult replay_trace(const std::string& trace_path,
                          const SuiteRunConfig& config);

}  // namespace agentloom::harness
