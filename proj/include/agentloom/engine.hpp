#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentloom/agents.hpp"
#include "agentloom/backend.hpp"
#include "agentloom/domain.hpp"
#include "agentloom/flags.hpp"
#include "agentloom/metacog.hpp"
#include "agentloom/scratchpad.hpp"
#include "agentloom/sim_device.hpp"
#include "agentloom/trace.hpp"

namespace agentloom::engine {

// ---------------------------------------------------------------------------
// Routing primitives
// ---------------------------------------------------------------------------

struct BranchSet {
  bool orchestrator = false;
  bool executor = false;
  bool stall = false;

  std::string summary() const;
};

// Completions nonempty -> orchestrator path; actions nonempty -> executor
// path; both empty -> stall.
BranchSet branch_after_cortex(const CortexOutput& output);

struct RouteDecision {
  enum class Kind { kContinue, kReplan, kTerminate };
  Kind kind = Kind::kContinue;
  bool success = false;

  std::string summary() const;
};

inline constexpr int kDefaultStallThreshold = 3;

// Called exactly once per cycle, after the convergence barrier. Ordering:
// any Failed subgoal -> Replan; all Completed -> Terminate(success);
// budget exhausted -> Terminate(failure); stall_count >= threshold -> mark
// the active subgoal Failed, then Replan; otherwise Continue.
RouteDecision route_after_convergence(Plan& plan, int stall_count,
                                      int budget_left,
                                      int stall_threshold = kDefaultStallThreshold);

struct BranchPanic : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BranchReport {
  std::string name;
  bool abnormal = false;
  std::string error;
};

// The barrier. Performs no routing; throws BranchPanic when a branch
// reported abnormal termination.
void converge(const std::vector<BranchReport>& reports);

// ---------------------------------------------------------------------------
// Task runner
// ---------------------------------------------------------------------------

struct RunParams {
  std::string run_id = "run";
  int summarizer_threshold = 40;
  int summarizer_keep_recent = 10;
  int stall_threshold = kDefaultStallThreshold;
  int metacog_window = metacog::kDefaultWindow;
  int stagnation_k = metacog::kDefaultStagnationK;
  int schema_retries = 2;
  bool concurrent_branches = true;
  // Extra key/values recorded in the run_start trace record (seed, fault
  // profile, preset...) so a trace is replayable.
  std::map<std::string, std::string> header;
};

struct RunResult {
  bool goal_completed = false;  // engine view: all subgoals confirmed done
  int cycles_used = 0;
  std::string error;  // "", "BudgetExhausted", "BackendError: ...", ...
  TraceLog trace;
  CostLedger ledger;
  DeviceState final_state;
  Plan final_plan;
  std::vector<std::pair<std::string, std::string>> notes;  // first-write order
  std::string structured_output;
  History final_history;
  std::vector<agents::PromptLogEntry> prompts;  // every assembled prompt
};

// Drives the full node graph against the device: init (Planner ->
// Orchestrator), then per cycle Contextor -> Cortex -> {Orchestrator path ||
// Executor path} -> Summarizer -> Convergence -> routing. With
// flags.multi_agent off the engine collapses to a single combined prompt
// loop.
RunResult run_task(const TaskGoal& goal, sim::DeviceController& device,
                   llm::LlmBackend& backend,
                   const agents::PromptLibrary& prompts,
                   const AblationFlags& flags, const RunParams& params = {});

}  // namespace agentloom::engine
