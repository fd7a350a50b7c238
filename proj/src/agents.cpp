#include "agentloom/agents.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace agentloom::agents {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Prompt library
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& required_fixtures() {
  static const std::vector<std::string> kRequired = {
      "planner",  "orchestrator", "cortex",     "cortex_hierarchy_only",
      "executor", "outputter",    "hopper",     "single_agent",
      "multimodal", "data_fidelity"};
  return kRequired;
}

}  // namespace

PromptLibrary PromptLibrary::from_assets(const std::string& assets_dir) {
  namespace fs = std::filesystem;
  PromptLibrary lib;
  std::string dir = assets_dir + "/prompts";
  if (!fs::is_directory(dir))
    throw PreconditionViolation("prompt fixture directory not found: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::ostringstream os;
    os << in.rdbuf();
    PromptFixture fixture;
    fixture.name = entry.path().stem().string();
    fixture.template_text = os.str();
    lib.fixtures_[fixture.name] = std::move(fixture);
  }
  for (const auto& name : required_fixtures())
    if (!lib.fixtures_.count(name))
      throw PreconditionViolation("missing prompt fixture: " + name);
  return lib;
}

const PromptFixture& PromptLibrary::get(const std::string& name) const {
  auto it = fixtures_.find(name);
  if (it == fixtures_.end())
    throw PreconditionViolation("unknown prompt fixture: " + name);
  return it->second;
}

bool PromptLibrary::has(const std::string& name) const {
  return fixtures_.count(name) > 0;
}

std::string render_template(const std::string& template_text,
                            const std::map<std::string, std::string>& values) {
  std::string out = template_text;
  for (const auto& [key, value] : values)
    out = replace_all(std::move(out), "{" + key + "}", value);
  return out;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::string render_history(const History& history) {
  std::ostringstream os;
  for (const auto& msg : history) {
    if (msg.role == Role::kContextor) {
      // The timestamp gets its own line so prompt fingerprints can strip it.
      std::size_t bar = msg.content.find(" | ");
      if (starts_with(msg.content, "Time:") && bar != std::string::npos) {
        os << msg.content.substr(0, bar) << "\n";
        os << "[c" << msg.cycle_index << "][" << to_string(msg.role) << "] "
           << msg.content.substr(bar + 3) << "\n";
        continue;
      }
    }
    os << "[c" << msg.cycle_index << "][" << to_string(msg.role) << "] "
       << msg.content << "\n";
  }
  return os.str();
}

std::string render_plan_status(const Plan& plan) {
  std::ostringstream os;
  os << "Plan revision " << plan.revision << ":\n";
  for (const auto& sg : plan.subgoals)
    os << "  " << sg.id << " [" << to_string(sg.status) << "] "
       << sg.description << "\n";
  return os.str();
}

std::string render_notes(const Scratchpad* pad) {
  if (pad == nullptr || pad->empty()) return "(none)";
  std::ostringstream os;
  bool first = true;
  for (const auto& note : pad->notes()) {
    if (!first) os << "\n";
    os << note.key << "=" << note.value;
    first = false;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON encode/decode of agent outputs
// ---------------------------------------------------------------------------

namespace {

ordered_json selector_to_json(const SelectorBundle& bundle) {
  ordered_json j;
  if (bundle.resource_id) j["resource_id"] = *bundle.resource_id;
  if (bundle.coordinates)
    j["coordinates"] = {bundle.coordinates->x, bundle.coordinates->y};
  if (bundle.text_match) j["text_match"] = *bundle.text_match;
  return j;
}

SelectorBundle selector_from_json(const ordered_json& j) {
  SelectorBundle bundle;
  if (j.contains("resource_id"))
    bundle.resource_id = j["resource_id"].get<std::string>();
  if (j.contains("coordinates") && j["coordinates"].is_array() &&
      j["coordinates"].size() == 2)
    bundle.coordinates =
        Point{j["coordinates"][0].get<int>(), j["coordinates"][1].get<int>()};
  if (j.contains("text_match"))
    bundle.text_match = j["text_match"].get<std::string>();
  return bundle;
}

ordered_json action_to_json(const ActionDecision& action) {
  ordered_json j;
  j["kind"] = action.kind == ActionKind::kUnknown ? action.raw_kind
                                                  : to_string(action.kind);
  if (action.target) j["target"] = selector_to_json(*action.target);
  if (action.payload) j["payload"] = *action.payload;
  j["reasoning"] = action.reasoning;
  return j;
}

ActionDecision action_from_json(const ordered_json& j) {
  ActionDecision action;
  action.raw_kind = j.at("kind").get<std::string>();
  action.kind = action_kind_from_string(action.raw_kind);
  if (j.contains("target") && j["target"].is_object() &&
      !j["target"].empty())
    action.target = selector_from_json(j["target"]);
  if (j.contains("payload")) action.payload = j["payload"].get<std::string>();
  action.reasoning = j.value("reasoning", "");
  return action;
}

ordered_json parse_json_or_throw(const std::string& text) {
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("response is not valid JSON");
  return j;
}

}  // namespace

std::string cortex_output_to_json(const CortexOutput& output) {
  ordered_json j;
  j["actions"] = ordered_json::array();
  for (const auto& action : output.actions)
    j["actions"].push_back(action_to_json(action));
  j["completions"] = output.completions;
  if (!output.pivot.empty()) j["pivot"] = output.pivot;
  return j.dump();
}

CortexOutput parse_cortex_output(const std::string& text) {
  ordered_json j = parse_json_or_throw(text);
  if (!j.is_object() || !j.contains("actions") || !j.contains("completions"))
    throw ParseError("expected {\"actions\": [...], \"completions\": [...]}");
  CortexOutput output;
  for (const auto& ja : j["actions"]) {
    ActionDecision action = action_from_json(ja);
    if (auto err = check_decision(action)) throw ParseError(*err);
    output.actions.push_back(std::move(action));
  }
  std::set<std::string> seen;
  for (const auto& jc : j["completions"]) {
    std::string id = jc.get<std::string>();
    if (seen.insert(id).second) output.completions.push_back(std::move(id));
  }
  output.pivot = j.value("pivot", "");
  return output;
}

std::string actions_to_json(const std::vector<ActionDecision>& actions) {
  ordered_json j = ordered_json::array();
  for (const auto& action : actions) j.push_back(action_to_json(action));
  return j.dump();
}

std::vector<exec::ToolCall> parse_tool_calls(const std::string& text) {
  ordered_json j = parse_json_or_throw(text);
  if (!j.is_object() || !j.contains("calls") || !j["calls"].is_array())
    throw ParseError("expected {\"calls\": [...]}");
  std::vector<exec::ToolCall> calls;
  for (const auto& jc : j["calls"]) {
    exec::ToolCall call;
    call.raw_name = jc.at("name").get<std::string>();
    call.name = action_kind_from_string(call.raw_name);
    if (jc.contains("selector") && jc["selector"].is_object() &&
        !jc["selector"].empty())
      call.selector = selector_from_json(jc["selector"]);
    if (jc.contains("payload"))
      call.payload = jc["payload"].get<std::string>();
    call.reasoning = jc.value("reasoning", "");
    calls.push_back(std::move(call));
  }
  return calls;
}

// ---------------------------------------------------------------------------
// Structured-call helper with bounded retries
// ---------------------------------------------------------------------------

namespace {

// Runs the backend call, then the parser; on parse failure appends a retry
// note to the prompt and tries again, ctx.schema_retries extra times.
template <typename T, typename Parser>
std::optional<T> call_structured(AgentContext& ctx, Role role,
                                 const std::string& prompt,
                                 const std::string& schema, Parser parse,
                                 std::string* last_error = nullptr) {
  std::string effective = prompt;
  for (int attempt = 0; attempt <= ctx.schema_retries; ++attempt) {
    llm::CompletionRequest request;
    request.agent_role = role;
    request.prompt = effective;
    request.output_schema = schema;
    if (ctx.prompt_log) ctx.prompt_log->push_back({role, effective});
    llm::Completion completion = ctx.backend->complete(request);
    if (ctx.on_call) ctx.on_call(role, effective, completion);
    try {
      return parse(completion.text);
    } catch (const ParseError& e) {
      if (last_error) *last_error = e.what();
      effective = prompt + "\nRetry " + std::to_string(attempt + 1) +
                  ": previous output failed validation: " + e.what();
    }
  }
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------
// Planner
// ---------------------------------------------------------------------------

Plan plan_task(const PlanRequest& request, AgentContext& ctx) {
  validate_goal(request.goal);

  std::ostringstream context;
  context << "Plan revision: " << request.revision << "\n";
  if (!request.failure_context.empty())
    context << "Replan context: " << request.failure_context << "\n";
  if (!request.preserve_completed.empty()) {
    context << "Already completed (do not repeat):\n";
    for (const auto& sg : request.preserve_completed)
      context << "  - " << sg.description << "\n";
  }
  if (request.failure_context.empty() && request.preserve_completed.empty())
    context << "(fresh task)";
  else
    context << "Plan the remaining work.";

  std::string prompt = render_template(
      ctx.prompts->get("planner").template_text,
      {{"goal", request.goal.text}, {"history", context.str()}});

  std::set<std::string> reserved;
  for (const auto& sg : request.preserve_completed) reserved.insert(sg.id);

  auto parse = [&](const std::string& text) {
    ordered_json j = parse_json_or_throw(text);
    if (!j.contains("subgoals") || !j["subgoals"].is_array() ||
        j["subgoals"].empty())
      throw ParseError("expected a nonempty \"subgoals\" array");
    std::vector<Subgoal> subgoals;
    std::set<std::string> ids = reserved;
    for (const auto& js : j["subgoals"]) {
      Subgoal sg;
      sg.id = js.at("id").get<std::string>();
      sg.description = js.at("description").get<std::string>();
      if (trim(sg.description).empty())
        throw ParseError("empty subgoal description: " + sg.id);
      if (!ids.insert(sg.id).second)
        throw ParseError("duplicate subgoal id: " + sg.id);
      subgoals.push_back(std::move(sg));
    }
    return subgoals;
  };

  std::string last_error;
  auto subgoals = call_structured<std::vector<Subgoal>>(
      ctx, Role::kPlanner, prompt,
      R"({"subgoals":[{"id":"string","description":"string"}]})", parse,
      &last_error);
  if (!subgoals)
    throw MalformedPlan("planner output failed validation: " + last_error);

  Plan plan;
  plan.revision = request.revision;
  for (auto sg : request.preserve_completed) {
    sg.status = SubgoalStatus::kCompleted;
    plan.subgoals.push_back(std::move(sg));
  }
  for (auto& sg : *subgoals) plan.subgoals.push_back(std::move(sg));
  return plan;
}

// ---------------------------------------------------------------------------
// Orchestrator
// ---------------------------------------------------------------------------

OrchestratorVerdict orchestrate(const Plan& plan,
                                const std::vector<std::string>& completions,
                                const History& history, AgentContext& ctx) {
  for (const auto& id : completions)
    if (!plan.find(id))
      throw PreconditionViolation("completion claims unknown subgoal: " + id);

  std::ostringstream review;
  review << render_plan_status(plan);
  review << "Marked for completion: "
         << (completions.empty() ? "(none)" : join(completions, ", "));

  std::string prompt = render_template(
      ctx.prompts->get("orchestrator").template_text,
      {{"subgoal", review.str()}, {"history", render_history(history)}});

  std::set<std::string> claimed(completions.begin(), completions.end());
  auto parse = [&](const std::string& text) {
    ordered_json j = parse_json_or_throw(text);
    OrchestratorVerdict verdict;
    for (const auto& jc : j.value("confirmed", ordered_json::array())) {
      std::string id = jc.get<std::string>();
      if (!claimed.count(id))
        throw ParseError("confirmed id was not claimed: " + id);
      verdict.confirmed.push_back(id);
    }
    for (const auto& jr : j.value("rejected", ordered_json::array())) {
      std::string id = jr.at("id").get<std::string>();
      if (!claimed.count(id))
        throw ParseError("rejected id was not claimed: " + id);
      verdict.rejected.push_back(id);
      verdict.reject_reasons[id] = jr.value("reason", "");
    }
    for (const auto& id : verdict.confirmed)
      if (std::count(verdict.rejected.begin(), verdict.rejected.end(), id))
        throw ParseError("id both confirmed and rejected: " + id);
    if (j.contains("advance_to") && !j["advance_to"].is_null()) {
      std::string next = j["advance_to"].get<std::string>();
      if (!next.empty()) {
        if (!plan.find(next))
          throw ParseError("advance_to names unknown subgoal: " + next);
        verdict.advance_to = next;
      }
    }
    return verdict;
  };

  std::string last_error;
  auto verdict = call_structured<OrchestratorVerdict>(
      ctx, Role::kOrchestrator, prompt,
      R"({"confirmed":["id"],"rejected":[{"id":"id","reason":"string"}],"advance_to":"id|null"})",
      parse, &last_error);
  if (!verdict)
    throw MalformedVerdict("orchestrator output failed validation: " +
                           last_error);
  return *verdict;
}

// ---------------------------------------------------------------------------
// Contextor
// ---------------------------------------------------------------------------

DeviceState gather_context(sim::DeviceController& device,
                           const TaskGoal& goal) {
  try {
    DeviceState state = device.get_state();
    if (!goal.app_lock.empty() && state.focused_package != goal.app_lock) {
      sim::ActionResult relaunch = device.launch_app(goal.app_lock);
      if (!relaunch.ok())
        throw DeviceUnavailable("app-lock relaunch failed: " +
                                relaunch.detail);
      state = device.get_state();
    }
    return state;
  } catch (const DeviceUnavailable&) {
    throw;
  } catch (const std::exception& e) {
    throw DeviceUnavailable(e.what());
  }
}

// ---------------------------------------------------------------------------
// Cortex
// ---------------------------------------------------------------------------

CortexOutput decide(const Subgoal& subgoal, const DeviceState& state,
                    const History& history, const Scratchpad* pad,
                    const std::optional<metacog::MetacogReport>& report,
                    AgentContext& ctx, const AblationFlags& flags) {
  if (subgoal.status != SubgoalStatus::kInProgress)
    throw PreconditionViolation("decide() requires an InProgress subgoal");

  const std::string base_name =
      flags.hybrid_perception ? "cortex" : "cortex_hierarchy_only";
  std::map<std::string, std::string> values = {
      {"subgoal", "[" + subgoal.id + "] " + subgoal.description},
      {"hierarchy", sim::serialize_hierarchy(state.hierarchy)},
      {"history", render_history(history)},
      {"notes", render_notes(pad)},
  };
  if (flags.hybrid_perception)
    values["screenshot_digest"] = state.screenshot_digest;

  std::ostringstream prompt;
  prompt << render_template(ctx.prompts->get(base_name).template_text, values);
  if (flags.hybrid_perception)
    prompt << "\n" << ctx.prompts->get("multimodal").template_text;
  if (flags.data_fidelity_prompt)
    prompt << "\n" << ctx.prompts->get("data_fidelity").template_text;
  if (flags.metacog && report)
    prompt << "\nMetacog analysis:\n" << metacog::render_report(*report)
           << "\n";

  auto parse = [](const std::string& text) {
    return parse_cortex_output(text);
  };
  auto output = call_structured<CortexOutput>(
      ctx, Role::kCortex, prompt.str(),
      R"({"actions":[{"kind":"string","target":{},"payload":"string","reasoning":"string"}],"completions":["id"],"pivot":"string"})",
      parse);
  // A persistently malformed decision degrades to an empty output (stall)
  // rather than aborting the run.
  return output.value_or(CortexOutput{});
}

// ---------------------------------------------------------------------------
// Executor
// ---------------------------------------------------------------------------

std::vector<exec::ToolCall> execute_decision(
    const std::vector<ActionDecision>& actions, AgentContext& ctx) {
  if (actions.empty())
    throw PreconditionViolation("execute_decision requires actions");
  for (const auto& action : actions)
    if (action.kind == ActionKind::kUnknown)
      throw UnknownActionKind("unknown action kind: " + action.raw_kind);

  std::string prompt =
      render_template(ctx.prompts->get("executor").template_text,
                      {{"history", actions_to_json(actions)}});

  auto parse = [&](const std::string& text) {
    std::vector<exec::ToolCall> calls = parse_tool_calls(text);
    if (calls.size() != actions.size())
      throw ParseError("call count mismatch");
    for (std::size_t i = 0; i < calls.size(); ++i)
      if (calls[i].name != actions[i].kind)
        throw ParseError("call kind mismatch at index " + std::to_string(i));
    return calls;
  };
  auto calls = call_structured<std::vector<exec::ToolCall>>(
      ctx, Role::kExecutor, prompt,
      R"({"calls":[{"name":"string","selector":{},"payload":"string","reasoning":"string"}]})",
      parse);
  if (calls) return *calls;

  // Persistent malformed translation degrades to the mechanical 1:1 mapping.
  std::vector<exec::ToolCall> fallback;
  fallback.reserve(actions.size());
  for (const auto& action : actions)
    fallback.push_back(exec::ToolCall::from_decision(action));
  return fallback;
}

// ---------------------------------------------------------------------------
// Summarizer
// ---------------------------------------------------------------------------

History summarize(const History& history, int threshold, int keep_recent) {
  if (keep_recent < 1 || threshold <= keep_recent)
    throw PreconditionViolation("summarize requires threshold > keep_recent >= 1");
  if (static_cast<int>(history.size()) <= threshold) return history;

  int to_drop = static_cast<int>(history.size()) - threshold;
  const std::size_t recent_start = history.size() - keep_recent;
  std::vector<bool> drop(history.size(), false);
  for (std::size_t i = 0; i < recent_start && to_drop > 0; ++i) {
    if (history[i].pinned) continue;
    drop[i] = true;
    --to_drop;
  }
  History result;
  result.reserve(history.size());
  for (std::size_t i = 0; i < history.size(); ++i)
    if (!drop[i]) result.push_back(history[i]);
  return result;
}

// ---------------------------------------------------------------------------
// Utility agents
// ---------------------------------------------------------------------------

namespace {

void validate_schema_spec(const ordered_json& schema) {
  if (!schema.is_object() || schema.empty())
    throw SchemaMismatch("schema must be a nonempty object");
  for (auto it = schema.begin(); it != schema.end(); ++it) {
    std::string type = it.value().is_string() ? it.value().get<std::string>()
                                              : std::string();
    if (type != "text" && type != "number" && type != "boolean")
      throw SchemaMismatch("unknown field type for \"" + it.key() +
                           "\": " + it.value().dump());
  }
}

void validate_against_schema(const ordered_json& schema,
                             const ordered_json& value) {
  if (!value.is_object()) throw ParseError("output must be a JSON object");
  for (auto it = schema.begin(); it != schema.end(); ++it) {
    if (!value.contains(it.key()))
      throw ParseError("missing field: " + it.key());
    const auto& field = value[it.key()];
    std::string type = it.value().get<std::string>();
    if (type == "text" && !field.is_string())
      throw ParseError("field " + it.key() + " must be text");
    if (type == "number" && !field.is_number())
      throw ParseError("field " + it.key() + " must be a number");
    if (type == "boolean" && !field.is_boolean())
      throw ParseError("field " + it.key() + " must be a boolean");
  }
}

}  // namespace

std::string outputter(const DeviceState& final_state, const Scratchpad& pad,
                      const std::string& schema, AgentContext& ctx) {
  if (trim(schema).empty())
    throw PreconditionViolation("output schema must be nonempty");
  ordered_json schema_json = ordered_json::parse(schema, nullptr, false);
  if (schema_json.is_discarded())
    throw SchemaMismatch("schema is not valid JSON");
  validate_schema_spec(schema_json);

  std::string prompt = render_template(
      ctx.prompts->get("outputter").template_text,
      {{"subgoal", schema},
       {"notes", render_notes(&pad)},
       {"hierarchy", sim::serialize_hierarchy(final_state.hierarchy)}});

  auto parse = [&](const std::string& text) {
    ordered_json value = parse_json_or_throw(text);
    validate_against_schema(schema_json, value);
    return value.dump();
  };
  std::string last_error;
  auto result = call_structured<std::string>(ctx, Role::kSystem, prompt,
                                             schema, parse, &last_error);
  if (!result)
    throw SchemaMismatch("output failed schema validation: " + last_error);
  return *result;
}

std::string hopper(const std::string& content,
                   const std::string& extraction_prompt, AgentContext& ctx) {
  if (trim(extraction_prompt).empty())
    throw PreconditionViolation("extraction prompt must be nonempty");
  if (content.empty()) return "";

  std::string prompt =
      render_template(ctx.prompts->get("hopper").template_text,
                      {{"subgoal", extraction_prompt}, {"history", content}});
  llm::CompletionRequest request;
  request.agent_role = Role::kSystem;
  request.prompt = prompt;
  if (ctx.prompt_log) ctx.prompt_log->push_back({Role::kSystem, prompt});
  llm::Completion completion = ctx.backend->complete(request);
  if (ctx.on_call) ctx.on_call(Role::kSystem, prompt, completion);
  return completion.text;
}

// ---------------------------------------------------------------------------
// Single-agent baseline
// ---------------------------------------------------------------------------

CombinedOutput decide_single(const TaskGoal& goal, const DeviceState& state,
                             const History& history, const Scratchpad* pad,
                             AgentContext& ctx, const AblationFlags& flags) {
  std::map<std::string, std::string> values = {
      {"goal", goal.text},
      {"hierarchy", sim::serialize_hierarchy(state.hierarchy)},
      {"history", render_history(history)},
      {"notes", render_notes(pad)},
  };
  std::ostringstream prompt;
  prompt << render_template(ctx.prompts->get("single_agent").template_text,
                            values);
  if (flags.data_fidelity_prompt)
    prompt << "\n" << ctx.prompts->get("data_fidelity").template_text;

  auto parse = [](const std::string& text) {
    ordered_json j = ordered_json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("actions"))
      throw ParseError("expected {\"actions\": [...], \"task_complete\": bool}");
    CombinedOutput output;
    for (const auto& ja : j["actions"]) {
      ActionDecision action = action_from_json(ja);
      if (auto err = check_decision(action)) throw ParseError(*err);
      output.actions.push_back(std::move(action));
    }
    output.task_complete = j.value("task_complete", false);
    return output;
  };
  auto output = call_structured<CombinedOutput>(
      ctx, Role::kCortex, prompt.str(),
      R"({"actions":[],"task_complete":false})", parse);
  return output.value_or(CombinedOutput{});
}

}  // namespace agentloom::agents
