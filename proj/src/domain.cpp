#include "agentloom/domain.hpp"

#include <set>
#include <sstream>

namespace agentloom {

void validate_goal(const TaskGoal& goal) {
  if (trim(goal.text).empty())
    throw PreconditionViolation("goal text must be nonempty");
  if (goal.step_budget < 1)
    throw PreconditionViolation("step_budget must be >= 1");
}

const char* to_string(SubgoalStatus s) {
  switch (s) {
    case SubgoalStatus::kPending: return "Pending";
    case SubgoalStatus::kInProgress: return "InProgress";
    case SubgoalStatus::kCompleted: return "Completed";
    case SubgoalStatus::kFailed: return "Failed";
  }
  return "?";
}

const char* to_string(LifecycleEvent e) {
  switch (e) {
    case LifecycleEvent::kStart: return "Start";
    case LifecycleEvent::kConfirmComplete: return "ConfirmComplete";
    case LifecycleEvent::kMarkFailed: return "MarkFailed";
    case LifecycleEvent::kResetOnReplan: return "ResetOnReplan";
  }
  return "?";
}

IllegalTransition::IllegalTransition(SubgoalStatus f, LifecycleEvent e)
    : std::logic_error(std::string("illegal subgoal transition: ") +
                       to_string(f) + " + " + to_string(e)),
      from(f),
      event(e) {}

SubgoalStatus transition_subgoal(SubgoalStatus current, LifecycleEvent event) {
  switch (event) {
    case LifecycleEvent::kStart:
      if (current == SubgoalStatus::kPending) return SubgoalStatus::kInProgress;
      break;
    case LifecycleEvent::kConfirmComplete:
      if (current == SubgoalStatus::kInProgress)
        return SubgoalStatus::kCompleted;
      break;
    case LifecycleEvent::kMarkFailed:
      if (current == SubgoalStatus::kInProgress) return SubgoalStatus::kFailed;
      break;
    case LifecycleEvent::kResetOnReplan:
      if (current == SubgoalStatus::kPending ||
          current == SubgoalStatus::kInProgress)
        return SubgoalStatus::kPending;
      break;
  }
  throw IllegalTransition(current, event);
}

Subgoal* Plan::find(std::string_view id) {
  for (auto& sg : subgoals)
    if (sg.id == id) return &sg;
  return nullptr;
}

const Subgoal* Plan::find(std::string_view id) const {
  for (const auto& sg : subgoals)
    if (sg.id == id) return &sg;
  return nullptr;
}

const Subgoal* Plan::active() const {
  for (const auto& sg : subgoals)
    if (sg.status == SubgoalStatus::kInProgress) return &sg;
  return nullptr;
}

const Subgoal* Plan::first_pending() const {
  for (const auto& sg : subgoals)
    if (sg.status == SubgoalStatus::kPending) return &sg;
  return nullptr;
}

bool Plan::all_completed() const {
  if (subgoals.empty()) return false;
  for (const auto& sg : subgoals)
    if (sg.status != SubgoalStatus::kCompleted) return false;
  return true;
}

bool Plan::any_failed() const {
  for (const auto& sg : subgoals)
    if (sg.status == SubgoalStatus::kFailed) return true;
  return false;
}

std::string ValidationReport::to_text() const {
  if (issues.empty()) return "valid";
  std::ostringstream os;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) os << "; ";
    switch (issues[i].kind) {
      case ValidationIssue::Kind::kDuplicateId:
        os << "DuplicateId(" << issues[i].detail << ")";
        break;
      case ValidationIssue::Kind::kEmptyDescription:
        os << "EmptyDescription(" << issues[i].detail << ")";
        break;
      case ValidationIssue::Kind::kMultipleActive:
        os << "MultipleActive";
        break;
    }
  }
  return os.str();
}

ValidationReport validate_plan(const Plan& plan) {
  ValidationReport report;
  std::set<std::string> seen;
  int active = 0;
  for (const auto& sg : plan.subgoals) {
    if (!seen.insert(sg.id).second)
      report.issues.push_back(
          {ValidationIssue::Kind::kDuplicateId, sg.id});
    if (trim(sg.description).empty())
      report.issues.push_back(
          {ValidationIssue::Kind::kEmptyDescription, sg.id});
    if (sg.status == SubgoalStatus::kInProgress) ++active;
  }
  if (active > 1)
    report.issues.push_back({ValidationIssue::Kind::kMultipleActive, ""});
  return report;
}

const UiNode* find_by_resource_id(const UiNode& root, std::string_view rid) {
  if (root.resource_id && *root.resource_id == rid) return &root;
  for (const auto& child : root.children)
    if (const UiNode* hit = find_by_resource_id(child, rid)) return hit;
  return nullptr;
}

const UiNode* find_by_node_id(const UiNode& root, std::string_view node_id) {
  if (root.node_id == node_id) return &root;
  for (const auto& child : root.children)
    if (const UiNode* hit = find_by_node_id(child, node_id)) return hit;
  return nullptr;
}

int count_nodes(const UiNode& root) {
  int n = 1;
  for (const auto& child : root.children) n += count_nodes(child);
  return n;
}

namespace {

void check_node(const UiNode& node, std::set<std::string>& ids,
                std::optional<std::string>& error) {
  if (error) return;
  if (!ids.insert(node.node_id).second) {
    error = "duplicate node_id: " + node.node_id;
    return;
  }
  for (const auto& child : node.children) {
    if (!node.bounds.contains_rect(child.bounds)) {
      error = "child " + child.node_id + " escapes bounds of " + node.node_id;
      return;
    }
    check_node(child, ids, error);
  }
}

}  // namespace

std::optional<std::string> check_hierarchy(const UiNode& root) {
  std::set<std::string> ids;
  std::optional<std::string> error;
  check_node(root, ids, error);
  return error;
}

std::string SelectorBundle::canonical() const {
  std::ostringstream os;
  bool first = true;
  if (resource_id) {
    os << "rid:" << *resource_id;
    first = false;
  }
  if (coordinates) {
    if (!first) os << "|";
    os << "pt:" << coordinates->x << "," << coordinates->y;
    first = false;
  }
  if (text_match) {
    if (!first) os << "|";
    os << "text:" << *text_match;
  }
  return os.str();
}

const char* to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::kTap: return "tap";
    case ActionKind::kSwipe: return "swipe";
    case ActionKind::kTypeText: return "type_text";
    case ActionKind::kBack: return "back";
    case ActionKind::kLaunchApp: return "launch_app";
    case ActionKind::kSaveNote: return "save_note";
    case ActionKind::kReadNote: return "read_note";
    case ActionKind::kListNotes: return "list_notes";
    case ActionKind::kStartRecording: return "start_recording";
    case ActionKind::kStopRecording: return "stop_recording";
    case ActionKind::kWait: return "wait";
    case ActionKind::kUnknown: return "unknown";
  }
  return "?";
}

ActionKind action_kind_from_string(std::string_view name) {
  if (name == "tap") return ActionKind::kTap;
  if (name == "swipe") return ActionKind::kSwipe;
  if (name == "type_text") return ActionKind::kTypeText;
  if (name == "back") return ActionKind::kBack;
  if (name == "launch_app") return ActionKind::kLaunchApp;
  if (name == "save_note") return ActionKind::kSaveNote;
  if (name == "read_note") return ActionKind::kReadNote;
  if (name == "list_notes") return ActionKind::kListNotes;
  if (name == "start_recording") return ActionKind::kStartRecording;
  if (name == "stop_recording") return ActionKind::kStopRecording;
  if (name == "wait") return ActionKind::kWait;
  return ActionKind::kUnknown;
}

std::optional<std::string> check_decision(const ActionDecision& d) {
  if (d.kind == ActionKind::kUnknown)
    return "unknown action kind: " + d.raw_kind;
  if (d.kind == ActionKind::kTypeText) {
    if (!d.target || !d.target->any())
      return "type_text requires a target selector";
    if (!d.payload) return "type_text requires a payload";
  }
  if (d.kind == ActionKind::kLaunchApp && (!d.payload || d.payload->empty()))
    return "launch_app requires a package payload";
  if (d.kind == ActionKind::kTap && (!d.target || !d.target->any()))
    return "tap requires a target selector";
  return std::nullopt;
}

const char* to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kPlanner: return "planner";
    case Role::kOrchestrator: return "orchestrator";
    case Role::kContextor: return "contextor";
    case Role::kCortex: return "cortex";
    case Role::kExecutor: return "executor";
    case Role::kTool: return "tool";
  }
  return "?";
}

Role role_from_string(std::string_view name) {
  if (name == "system") return Role::kSystem;
  if (name == "planner") return Role::kPlanner;
  if (name == "orchestrator") return Role::kOrchestrator;
  if (name == "contextor") return Role::kContextor;
  if (name == "cortex") return Role::kCortex;
  if (name == "executor") return Role::kExecutor;
  if (name == "tool") return Role::kTool;
  throw PreconditionViolation("unknown role: " + std::string(name));
}

}  // namespace agentloom
