#include "agentloom/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "agentloom/agents.hpp"
#include "agentloom/sim_device.hpp"
#include "json.hpp"

namespace agentloom::oracle {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Script loading
// ---------------------------------------------------------------------------

namespace {

Directive parse_directive(const ordered_json& j) {
  Directive d;
  d.kind = j.at("do").get<std::string>();
  d.rid = j.value("rid", "");
  d.text_match = j.value("text_match", "");
  d.pkg = j.value("pkg", "");
  d.direction = j.value("direction", "down");
  d.text = j.value("text", "");
  d.note = j.value("note", "");
  d.key = j.value("key", "");
  d.value = j.value("value", "");
  d.from_rid = j.value("from_rid", "");
  d.expect_distinct_min = j.value("expect_distinct_min", 0);
  if (j.contains("fallback"))
    for (const auto& jf : j["fallback"]) d.fallback.push_back(parse_directive(jf));
  return d;
}

}  // namespace

TaskScript parse_task_script(const std::string& json_text) {
  ordered_json j = ordered_json::parse(json_text);
  TaskScript script;
  script.task_id = j.at("task").get<std::string>();
  script.goal_text = j.at("goal").get<std::string>();
  script.dual = j.value("dual", false);
  for (const auto& jp : j.at("plans")) {
    PlanScript plan;
    for (const auto& js : jp.at("subgoals")) {
      SubgoalScript sg;
      sg.id = js.at("id").get<std::string>();
      sg.description = js.at("description").get<std::string>();
      sg.batch = js.value("batch", false);
      for (const auto& jd : js.at("dirs"))
        sg.dirs.push_back(parse_directive(jd));
      plan.subgoals.push_back(std::move(sg));
    }
    script.plans.push_back(std::move(plan));
  }
  if (script.plans.empty())
    throw PreconditionViolation("task script needs at least one plan: " +
                                script.task_id);
  return script;
}

ScriptSet ScriptSet::from_assets(const std::string& assets_dir) {
  namespace fs = std::filesystem;
  ScriptSet set;
  std::string dir = assets_dir + "/scripts";
  if (!fs::is_directory(dir))
    throw PreconditionViolation("task script directory not found: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".json")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  for (const auto& path : paths) {
    std::ifstream in(path);
    std::ostringstream os;
    os << in.rdbuf();
    set.scripts_.push_back(parse_task_script(os.str()));
  }
  return set;
}

const TaskScript* ScriptSet::find_by_goal(const std::string& goal_text) const {
  for (const auto& script : scripts_)
    if (script.goal_text == goal_text) return &script;
  return nullptr;
}

const TaskScript* ScriptSet::find_by_id(const std::string& task_id) const {
  for (const auto& script : scripts_)
    if (script.task_id == task_id) return &script;
  return nullptr;
}

std::vector<std::string> ScriptSet::task_ids() const {
  std::vector<std::string> ids;
  for (const auto& script : scripts_) ids.push_back(script.task_id);
  return ids;
}

void ScriptSet::add(TaskScript script) { scripts_.push_back(std::move(script)); }

// ---------------------------------------------------------------------------
// Prompt parsing helpers
// ---------------------------------------------------------------------------

namespace {

std::string line_after(const std::string& prompt, const std::string& prefix) {
  for (const auto& line : split_lines(prompt))
    if (starts_with(line, prefix)) return trim(line.substr(prefix.size()));
  return "";
}

std::string section_between(const std::string& prompt,
                            const std::string& begin_marker,
                            const std::vector<std::string>& end_markers) {
  std::size_t begin = prompt.find(begin_marker);
  if (begin == std::string::npos) return "";
  begin += begin_marker.size();
  std::size_t end = prompt.size();
  for (const auto& marker : end_markers) {
    std::size_t pos = prompt.find(marker, begin);
    if (pos != std::string::npos) end = std::min(end, pos);
  }
  return prompt.substr(begin, end - begin);
}

// One executed tool call, reconstructed from a history line.
struct ToolEvent {
  std::string sg;       // subgoal base id from the reasoning tag
  int dir_index = -1;
  std::string variant;  // "p" or "fN"
  bool ok = false;
  std::string detail;
};

// Reasoning tags look like "[open/0/p]".
bool parse_tag(const std::string& reasoning, ToolEvent& event) {
  if (reasoning.empty() || reasoning[0] != '[') return false;
  std::size_t close = reasoning.find(']');
  if (close == std::string::npos) return false;
  std::string tag = reasoning.substr(1, close - 1);
  std::size_t s1 = tag.find('/');
  std::size_t s2 = tag.rfind('/');
  if (s1 == std::string::npos || s2 == s1) return false;
  event.sg = tag.substr(0, s1);
  try {
    event.dir_index = std::stoi(tag.substr(s1 + 1, s2 - s1 - 1));
  } catch (...) {
    return false;
  }
  event.variant = tag.substr(s2 + 1);
  return true;
}

std::vector<ToolEvent> parse_tool_events(const std::string& history_section) {
  std::vector<ToolEvent> events;
  for (const auto& line : split_lines(history_section)) {
    std::size_t marker = line.find("][tool] ");
    if (marker == std::string::npos) continue;
    ordered_json j =
        ordered_json::parse(line.substr(marker + 8), nullptr, false);
    if (j.is_discarded()) continue;
    ToolEvent event;
    if (!parse_tag(j.value("reasoning", ""), event)) continue;
    event.ok = j.value("ok", false);
    event.detail = j.value("detail", "");
    events.push_back(std::move(event));
  }
  return events;
}

int parse_distinct_frames(const std::string& detail) {
  std::size_t pos = detail.find("distinct=");
  if (pos == std::string::npos) return -1;
  return std::atoi(detail.c_str() + pos + 9);
}

// Whether a directive's last execution satisfied it.
bool event_satisfies(const ToolEvent& event, const Directive& dir) {
  if (!event.ok) return false;
  if (dir.kind == "record_stop" && dir.expect_distinct_min > 0)
    return parse_distinct_frames(event.detail) >= dir.expect_distinct_min;
  return true;
}

// Over-helpful formatting applied when the data-fidelity instruction is
// absent: sentence-case the first alphabetic character.
std::string autocap(std::string text) {
  for (char& c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      break;
    }
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '"' && c != '\'')
      break;  // leading digits/punctuation: leave content alone
  }
  return text;
}

ordered_json selector_json(const Directive& dir) {
  ordered_json j;
  if (!dir.rid.empty()) j["resource_id"] = dir.rid;
  if (!dir.text_match.empty()) j["text_match"] = dir.text_match;
  return j;
}

// Renders one directive as a Cortex action object.
ordered_json directive_action(const Directive& dir, const std::string& sg,
                              int index, const std::string& variant,
                              bool fidelity, const UiNode* hierarchy) {
  ordered_json action;
  std::string tag = "[" + sg + "/" + std::to_string(index) + "/" + variant + "]";
  if (dir.kind == "launch") {
    action["kind"] = "launch_app";
    action["payload"] = dir.pkg;
    action["reasoning"] = tag + " open app";
  } else if (dir.kind == "tap") {
    action["kind"] = "tap";
    action["target"] = selector_json(dir);
    action["reasoning"] = tag + " tap";
  } else if (dir.kind == "swipe") {
    action["kind"] = "swipe";
    action["payload"] = dir.direction;
    action["reasoning"] = tag + " scroll";
  } else if (dir.kind == "back") {
    action["kind"] = "back";
    action["reasoning"] = tag + " navigate back";
  } else if (dir.kind == "wait") {
    action["kind"] = "wait";
    action["reasoning"] = tag + " wait";
  } else if (dir.kind == "type") {
    action["kind"] = "type_text";
    action["target"] = selector_json(dir);
    std::string payload;
    if (!dir.note.empty()) {
      payload = "{note:" + dir.note + "}";
    } else {
      payload = fidelity ? dir.text : autocap(dir.text);
    }
    action["payload"] = payload;
    action["reasoning"] = tag + " enter text";
  } else if (dir.kind == "save_note") {
    action["kind"] = "save_note";
    std::string value = dir.value;
    if (!dir.from_rid.empty()) {
      value = "";
      if (hierarchy) {
        const UiNode* node = find_by_resource_id(*hierarchy, dir.from_rid);
        if (node && node->text) value = *node->text;
      }
    }
    action["payload"] = dir.key + "=" + value;
    action["reasoning"] = tag + " remember " + dir.key;
  } else if (dir.kind == "read_note") {
    action["kind"] = "read_note";
    action["payload"] = dir.key;
    action["reasoning"] = tag + " recall " + dir.key;
  } else if (dir.kind == "record_start") {
    action["kind"] = "start_recording";
    action["reasoning"] = tag + " record screen";
  } else if (dir.kind == "record_stop") {
    action["kind"] = "stop_recording";
    action["reasoning"] = tag + " review recording";
  } else {
    throw PreconditionViolation("unknown directive kind: " + dir.kind);
  }
  return action;
}

// Directive progress for one subgoal. A directive is satisfied by a
// successful primary execution, or by its full fallback chain completing
// in order after a failed primary (the pivot route reached the same
// outcome another way).
struct WalkState {
  int p = 0;       // next unsatisfied directive
  int fstage = 0;  // next fallback index expected for dirs[p]
  bool last_primary_failed = false;
  std::string last_failure_detail;
};

WalkState directive_walk(const std::vector<ToolEvent>& events,
                         const std::string& sg, const SubgoalScript& script) {
  WalkState state;
  for (const auto& event : events) {
    if (state.p >= static_cast<int>(script.dirs.size())) break;
    if (event.sg != sg || event.dir_index != state.p) continue;
    const Directive& dir = script.dirs[static_cast<std::size_t>(state.p)];
    if (event.variant == "p") {
      if (event_satisfies(event, dir)) {
        ++state.p;
        state.fstage = 0;
        state.last_primary_failed = false;
      } else {
        state.last_primary_failed = true;
        state.last_failure_detail = event.detail;
        state.fstage = 0;
      }
    } else if (state.last_primary_failed &&
               event.variant == "f" + std::to_string(state.fstage)) {
      if (event.ok) {
        ++state.fstage;
        if (!dir.fallback.empty() &&
            state.fstage == static_cast<int>(dir.fallback.size())) {
          ++state.p;
          state.fstage = 0;
          state.last_primary_failed = false;
        }
      } else {
        state.fstage = 0;
      }
    }
  }
  return state;
}

int directive_pointer(const std::vector<ToolEvent>& events,
                      const std::string& sg, const SubgoalScript& script) {
  return directive_walk(events, sg, script).p;
}

// Dead-end failures warrant giving up and replanning; transient ones
// (failed typing verification) warrant plain retries.
bool structural_failure(const std::string& detail) {
  return starts_with(detail, "ElementNotFound") ||
         starts_with(detail, "FieldNotEditable") ||
         starts_with(detail, "UnknownApp") ||
         starts_with(detail, "NoFocusedField");
}

struct SubgoalRef {
  int revision = 1;
  std::string base;
  std::string full;  // "r<revision>-<base>"
};

std::optional<SubgoalRef> parse_subgoal_id(const std::string& id) {
  if (id.size() < 4 || id[0] != 'r') return std::nullopt;
  std::size_t dash = id.find('-');
  if (dash == std::string::npos) return std::nullopt;
  SubgoalRef ref;
  try {
    ref.revision = std::stoi(id.substr(1, dash - 1));
  } catch (...) {
    return std::nullopt;
  }
  ref.base = id.substr(dash + 1);
  ref.full = id;
  return ref;
}

const PlanScript& plan_for_revision(const TaskScript& task, int revision) {
  int index = std::min<int>(revision - 1,
                            static_cast<int>(task.plans.size()) - 1);
  return task.plans[std::max(index, 0)];
}

const SubgoalScript* find_subgoal(const PlanScript& plan,
                                  const std::string& base) {
  for (const auto& sg : plan.subgoals)
    if (sg.id == base) return &sg;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Per-role responders
// ---------------------------------------------------------------------------

std::string respond_planner(const ScriptSet& scripts,
                            const std::string& prompt) {
  std::string goal = line_after(prompt, "Goal: ");
  const TaskScript* task = scripts.find_by_goal(goal);
  if (!task)
    throw std::runtime_error("oracle has no task script for goal: " + goal);
  int revision = 1;
  std::string rev_line = line_after(prompt, "Plan revision: ");
  if (!rev_line.empty()) revision = std::atoi(rev_line.c_str());

  // Skip subgoals whose descriptions the engine reports as completed.
  std::vector<std::string> done;
  std::string completed_section = section_between(
      prompt, "Already completed (do not repeat):\n", {"\nDecompose"});
  for (const auto& line : split_lines(completed_section)) {
    std::string t = trim(line);
    if (starts_with(t, "- ")) done.push_back(t.substr(2));
  }

  const PlanScript& plan = plan_for_revision(*task, revision);
  std::size_t skip = 0;
  for (const auto& sg : plan.subgoals) {
    if (skip < done.size() && done[skip] == sg.description)
      ++skip;
    else
      break;
  }

  ordered_json out;
  out["subgoals"] = ordered_json::array();
  for (std::size_t i = skip; i < plan.subgoals.size(); ++i) {
    const auto& sg = plan.subgoals[i];
    out["subgoals"].push_back(
        {{"id", "r" + std::to_string(revision) + "-" + sg.id},
         {"description", sg.description}});
  }
  if (out["subgoals"].empty())
    out["subgoals"].push_back(
        {{"id", "r" + std::to_string(revision) + "-wrap"},
         {"description", "Confirm the goal is satisfied"}});
  return out.dump();
}

std::string respond_cortex(const ScriptSet& scripts,
                           const std::string& prompt) {
  // The goal rides along as the pinned system message in the history block.
  std::string goal = line_after(prompt, "[c0][system] Goal: ");
  const TaskScript* task = scripts.find_by_goal(goal);
  if (!task)
    throw std::runtime_error("oracle has no task script for goal: " + goal);

  std::string subgoal_line = line_after(prompt, "Current subgoal: ");
  auto ref = subgoal_line.empty() || subgoal_line[0] != '['
                 ? std::nullopt
                 : parse_subgoal_id(
                       subgoal_line.substr(1, subgoal_line.find(']') - 1));
  ordered_json out;
  out["actions"] = ordered_json::array();
  out["completions"] = ordered_json::array();
  if (!ref) return out.dump();

  const PlanScript& plan = plan_for_revision(*task, ref->revision);
  const SubgoalScript* sg = find_subgoal(plan, ref->base);
  if (!sg) return out.dump();

  const bool fidelity = contains(prompt, "Data fidelity:");
  // Only the injected report counts as a warning; pivot notes quoted in the
  // history must not re-trigger it.
  std::string metacog_section =
      section_between(prompt, "Metacog analysis:\n", {});
  const bool warned = contains(metacog_section, "cycle detected") ||
                      contains(metacog_section, "stagnant: true");

  std::string history = section_between(prompt, "Recent events:\n",
                                        {"\nRespond with JSON"});
  std::vector<ToolEvent> events = parse_tool_events(history);

  std::optional<UiNode> hierarchy;
  std::string hierarchy_text = section_between(
      prompt, "UI hierarchy:\n", {"\nRecent events:"});
  if (!hierarchy_text.empty()) {
    try {
      hierarchy = sim::parse_hierarchy(hierarchy_text);
    } catch (...) {
      hierarchy.reset();
    }
  }

  WalkState walk = directive_walk(events, ref->full, *sg);
  int p = walk.p;

  if (p >= static_cast<int>(sg->dirs.size())) {
    out["completions"].push_back(ref->full);
    if (task->dual) {
      // Completion plus the next subgoal's first action in one cycle.
      for (std::size_t i = 0; i + 1 < plan.subgoals.size(); ++i) {
        if (plan.subgoals[i].id != ref->base) continue;
        const SubgoalScript& next = plan.subgoals[i + 1];
        if (!next.dirs.empty()) {
          std::string next_full =
              "r" + std::to_string(ref->revision) + "-" + next.id;
          out["actions"].push_back(
              directive_action(next.dirs[0], next_full, 0, "p", fidelity,
                               hierarchy ? &*hierarchy : nullptr));
        }
        break;
      }
    }
    return out.dump();
  }

  const Directive& dir = sg->dirs[static_cast<std::size_t>(p)];

  // A failed directive with a pivot warning (or an in-flight fallback
  // chain) takes the alternative route; a dead end with no alternative
  // stops acting so the stall path can fail the subgoal and replan.
  if (walk.last_primary_failed && (warned || walk.fstage > 0)) {
    if (walk.fstage < static_cast<int>(dir.fallback.size())) {
      out["actions"].push_back(directive_action(
          dir.fallback[static_cast<std::size_t>(walk.fstage)], ref->full, p,
          "f" + std::to_string(walk.fstage), fidelity,
          hierarchy ? &*hierarchy : nullptr));
      out["pivot"] = "loop detected; trying an alternative route";
      return out.dump();
    }
    if (dir.fallback.empty() && warned &&
        structural_failure(walk.last_failure_detail)) {
      out["pivot"] = "loop detected; no alternative available";
      return out.dump();
    }
  }

  int emit_until = sg->batch ? static_cast<int>(sg->dirs.size()) : p + 1;
  for (int i = p; i < emit_until; ++i) {
    out["actions"].push_back(directive_action(
        sg->dirs[static_cast<std::size_t>(i)], ref->full, i, "p", fidelity,
        hierarchy ? &*hierarchy : nullptr));
  }
  return out.dump();
}

std::string respond_orchestrator(const ScriptSet& scripts,
                                 const std::string& prompt) {
  // The pinned goal message travels in the rendered history.
  std::string goal = line_after(prompt, "[c0][system] Goal: ");
  const TaskScript* task = scripts.find_by_goal(goal);
  if (!task)
    throw std::runtime_error("oracle has no task script for goal: " + goal);

  std::string claims_line = line_after(prompt, "Marked for completion: ");
  std::vector<std::string> claims;
  if (claims_line != "(none)" && !claims_line.empty()) {
    for (auto& piece : split_lines(replace_all(claims_line, ", ", "\n")))
      claims.push_back(trim(piece));
  }

  std::string history =
      section_between(prompt, "Recent events:\n", {"\nConfirm a claimed"});
  std::vector<ToolEvent> events = parse_tool_events(history);

  ordered_json out;
  out["confirmed"] = ordered_json::array();
  out["rejected"] = ordered_json::array();
  for (const auto& claim : claims) {
    auto ref = parse_subgoal_id(claim);
    const SubgoalScript* sg =
        ref ? find_subgoal(plan_for_revision(*task, ref->revision), ref->base)
            : nullptr;
    if (sg &&
        directive_pointer(events, ref->full, *sg) ==
            static_cast<int>(sg->dirs.size())) {
      out["confirmed"].push_back(claim);
    } else {
      out["rejected"].push_back(
          {{"id", claim}, {"reason", "insufficient evidence of completion"}});
    }
  }

  // First pending subgoal in the status block becomes the next active one.
  out["advance_to"] = nullptr;
  for (const auto& line : split_lines(prompt)) {
    std::string t = trim(line);
    std::size_t mark = t.find(" [Pending] ");
    if (mark != std::string::npos && !starts_with(t, "Marked")) {
      out["advance_to"] = t.substr(0, mark);
      break;
    }
  }
  return out.dump();
}

std::string respond_executor(const std::string& prompt) {
  std::string actions_text =
      section_between(prompt, "Decided actions:\n", {"\nRespond with JSON"});
  ordered_json actions = ordered_json::parse(trim(actions_text));
  ordered_json out;
  out["calls"] = ordered_json::array();
  for (const auto& action : actions) {
    ordered_json call;
    call["name"] = action.at("kind");
    if (action.contains("target")) call["selector"] = action["target"];
    if (action.contains("payload")) call["payload"] = action["payload"];
    call["reasoning"] = action.value("reasoning", "");
    out["calls"].push_back(std::move(call));
  }
  return out.dump();
}

std::string respond_single_agent(const ScriptSet& scripts,
                                 const std::string& prompt) {
  std::string goal = line_after(prompt, "Goal: ");
  const TaskScript* task = scripts.find_by_goal(goal);
  if (!task)
    throw std::runtime_error("oracle has no task script for goal: " + goal);

  const bool fidelity = contains(prompt, "Data fidelity:");
  std::string history = section_between(prompt, "Conversation so far:\n",
                                        {"\nWork toward the goal"});
  std::vector<ToolEvent> events = parse_tool_events(history);

  // No orchestrated plan in the baseline: one flat directive list, progress
  // re-derived every cycle from whatever history is still visible.
  std::vector<const Directive*> flat;
  for (const auto& sg : task->plans.front().subgoals)
    for (const auto& dir : sg.dirs) flat.push_back(&dir);

  int p = 0;
  for (const auto& event : events) {
    if (p >= static_cast<int>(flat.size())) break;
    if (event.sg == "flat" && event.dir_index == p && event.variant == "p" &&
        event_satisfies(event, *flat[static_cast<std::size_t>(p)]))
      ++p;
  }

  std::optional<UiNode> hierarchy;
  std::string hierarchy_text =
      section_between(prompt, "UI hierarchy:\n", {"\nConversation so far:"});
  if (!hierarchy_text.empty()) {
    try {
      hierarchy = sim::parse_hierarchy(hierarchy_text);
    } catch (...) {
      hierarchy.reset();
    }
  }

  ordered_json out;
  out["actions"] = ordered_json::array();
  if (p >= static_cast<int>(flat.size())) {
    out["task_complete"] = true;
    return out.dump();
  }
  out["actions"].push_back(
      directive_action(*flat[static_cast<std::size_t>(p)], "flat", p, "p",
                       fidelity, hierarchy ? &*hierarchy : nullptr));
  out["task_complete"] = false;
  return out.dump();
}

std::string respond_outputter(const std::string& prompt) {
  std::string schema_text = section_between(
      prompt, "Required schema (field name to type):\n",
      {"\nNotes collected"});
  ordered_json schema = ordered_json::parse(trim(schema_text));

  std::map<std::string, std::string> notes;
  std::string notes_text = section_between(
      prompt, "Notes collected during the task:\n", {"\nFinal screen:"});
  for (const auto& line : split_lines(notes_text)) {
    std::size_t eq = line.find('=');
    if (eq != std::string::npos && eq > 0)
      notes[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  ordered_json out;
  for (auto it = schema.begin(); it != schema.end(); ++it) {
    std::string type = it.value().get<std::string>();
    auto note = notes.find(it.key());
    if (type == "text")
      out[it.key()] = note == notes.end() ? "" : note->second;
    else if (type == "number")
      out[it.key()] =
          note == notes.end() ? 0.0 : std::atof(note->second.c_str());
    else
      out[it.key()] = note != notes.end() && note->second == "true";
  }
  return out.dump();
}

std::string respond_hopper(const std::string& prompt) {
  std::string content =
      section_between(prompt, "Content:\n", {"\nRespond with"});
  // Extraction rule: last decimal number in the content, else the trimmed
  // content itself.
  std::string best;
  std::string current;
  for (char c : content) {
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && !current.empty())) {
      current.push_back(c);
    } else {
      if (!current.empty() && current.back() == '.') current.pop_back();
      if (!current.empty()) best = current;
      current.clear();
    }
  }
  if (!current.empty() && current.back() == '.') current.pop_back();
  if (!current.empty()) best = current;
  return best.empty() ? trim(content) : best;
}

}  // namespace

std::string oracle_respond(const ScriptSet& scripts,
                           const llm::CompletionRequest& request) {
  switch (request.agent_role) {
    case Role::kPlanner:
      return respond_planner(scripts, request.prompt);
    case Role::kOrchestrator:
      return respond_orchestrator(scripts, request.prompt);
    case Role::kCortex:
      if (contains(request.prompt, "single mobile-automation agent"))
        return respond_single_agent(scripts, request.prompt);
      return respond_cortex(scripts, request.prompt);
    case Role::kExecutor:
      return respond_executor(request.prompt);
    case Role::kSystem:
      if (contains(request.prompt, "You are the Hopper"))
        return respond_hopper(request.prompt);
      return respond_outputter(request.prompt);
    default:
      throw std::runtime_error("oracle cannot answer for role " +
                               std::string(to_string(request.agent_role)));
  }
}

OracleBackend::OracleBackend(const ScriptSet& scripts,
                             llm::ModelAssignment models)
    : scripts_(scripts), models_(std::move(models)) {}

llm::Completion OracleBackend::complete(const llm::CompletionRequest& request) {
  if (request.prompt.empty())
    throw PreconditionViolation("completion prompt must be nonempty");
  std::string text = oracle_respond(scripts_, request);
  {
    std::lock_guard lock(mu_);
    book_.add(request.agent_role,
              llm::request_fingerprint(request.agent_role, request.prompt),
              text);
  }
  llm::Completion completion;
  completion.text = std::move(text);
  completion.usage.input_tokens = llm::estimate_tokens(request.prompt);
  completion.usage.output_tokens = llm::estimate_tokens(completion.text);
  completion.usage.model_name = models_.model_for(request.agent_role);
  return completion;
}

llm::ScriptBook OracleBackend::book() const {
  std::lock_guard lock(mu_);
  return book_;
}

}  // namespace agentloom::oracle
