#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentloom/backend.hpp"
#include "agentloom/domain.hpp"
#include "agentloom/flags.hpp"
#include "agentloom/metacog.hpp"
#include "agentloom/scratchpad.hpp"
#include "agentloom/sim_device.hpp"
#include "agentloom/toolcall.hpp"

namespace agentloom::agents {

// ---------------------------------------------------------------------------
// Prompt fixtures. Plain-text templates; placeholders are drawn from the
// documented set {goal} {subgoal} {hierarchy} {screenshot_digest} {history}
// {notes}. Instruction fixtures carry no placeholders and are appended to
// the base template by decide().
// ---------------------------------------------------------------------------

struct PromptFixture {
  std::string name;
  std::string template_text;
  bool pinned = false;
};

class PromptLibrary {
 public:
  // Loads every *.txt in <dir>/prompts. Throws when a required fixture
  // (planner, orchestrator, cortex, cortex_hierarchy_only, executor,
  // outputter, hopper, single_agent, multimodal, data_fidelity) is missing.
  static PromptLibrary from_assets(const std::string& assets_dir);

  const PromptFixture& get(const std::string& name) const;
  bool has(const std::string& name) const;

 private:
  std::map<std::string, PromptFixture> fixtures_;
};

// Substitutes {placeholder} occurrences; unknown placeholders are left
// verbatim so template mistakes stay visible.
std::string render_template(const std::string& template_text,
                            const std::map<std::string, std::string>& values);

// ---------------------------------------------------------------------------
// Shared rendering / parsing of agent I/O
// ---------------------------------------------------------------------------

std::string render_history(const History& history);
std::string render_plan_status(const Plan& plan);
std::string render_notes(const Scratchpad* pad);

std::string cortex_output_to_json(const CortexOutput& output);
CortexOutput parse_cortex_output(const std::string& text);  // throws ParseError
std::string actions_to_json(const std::vector<ActionDecision>& actions);
std::vector<exec::ToolCall> parse_tool_calls(const std::string& text);

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MalformedPlan : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedVerdict : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownActionKind : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DeviceUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Agent context: backend handle, fixtures, retry budget, observability
// ---------------------------------------------------------------------------

struct PromptLogEntry {
  Role role = Role::kSystem;
  std::string prompt;
};

struct AgentContext {
  llm::LlmBackend* backend = nullptr;
  const PromptLibrary* prompts = nullptr;
  int schema_retries = 2;  // extra attempts after the first
  std::vector<PromptLogEntry>* prompt_log = nullptr;
  // Invoked once per backend call, successful or not-yet-parsed; the engine
  // uses it for trace records and the cost ledger.
  std::function<void(Role, const std::string& prompt,
                     const llm::Completion&)> on_call;
};

// ---------------------------------------------------------------------------
// Graph agents
// ---------------------------------------------------------------------------

struct PlanRequest {
  TaskGoal goal;
  std::string failure_context;           // replan trigger description
  std::vector<Subgoal> preserve_completed;
  int revision = 1;
};

// Decomposes the goal into ordered Pending subgoals with unique ids;
// preserved Completed subgoals are prepended. MalformedPlan after retries.
Plan plan_task(const PlanRequest& request, AgentContext& ctx);

struct OrchestratorVerdict {
  std::vector<std::string> confirmed;
  std::vector<std::string> rejected;
  std::map<std::string, std::string> reject_reasons;
  std::optional<std::string> advance_to;
};

// Reviews completions claimed by the Cortex. Precondition: claims are
// subgoal ids present in the plan. MalformedVerdict after retries.
OrchestratorVerdict orchestrate(const Plan& plan,
                                const std::vector<std::string>& completions,
                                const History& history, AgentContext& ctx);

// Fresh device state; honors goal.app_lock by relaunching the locked app
// when something else holds the foreground.
DeviceState gather_context(sim::DeviceController& device, const TaskGoal& goal);

// Central decision call. Prompt composition follows the flags: hierarchy
// plus screenshot digest under hybrid perception, hierarchy only otherwise;
// data-fidelity instruction; metacog report section. A decision that stays
// malformed after retries degrades to an empty output (a stall), not an
// error.
CortexOutput decide(const Subgoal& subgoal, const DeviceState& state,
                    const History& history, const Scratchpad* pad,
                    const std::optional<metacog::MetacogReport>& report,
                    AgentContext& ctx, const AblationFlags& flags);

// Translates decisions 1:1 into tool calls, preserving order and reasoning
// annotations. Throws UnknownActionKind / PreconditionViolation.
std::vector<exec::ToolCall> execute_decision(
    const std::vector<ActionDecision>& actions, AgentContext& ctx);

// Pure history compression: keeps every pinned message and the most recent
// keep_recent verbatim, drops oldest unpinned first, result <= threshold.
History summarize(const History& history, int threshold, int keep_recent);

// Structured output against a {"field": "text|number|boolean"} schema.
// Throws SchemaMismatch (bad schema or persistent invalid output).
std::string outputter(const DeviceState& final_state, const Scratchpad& pad,
                      const std::string& schema, AgentContext& ctx);

// Targeted extraction from provided content.
std::string hopper(const std::string& content,
                   const std::string& extraction_prompt, AgentContext& ctx);

// Frame-log summary used for temporal tasks; deterministic stand-in for a
// video-capable model.
inline std::string video_summary(const sim::FrameLog& log) {
  return sim::describe_frames(log);
}

// ---------------------------------------------------------------------------
// Single-agent baseline (multi_agent flag off): one combined prompt loop.
// ---------------------------------------------------------------------------

struct CombinedOutput {
  std::vector<ActionDecision> actions;
  bool task_complete = false;
};

CombinedOutput decide_single(const TaskGoal& goal, const DeviceState& state,
                             const History& history, const Scratchpad* pad,
                             AgentContext& ctx, const AblationFlags& flags);

}  // namespace agentloom::agents
