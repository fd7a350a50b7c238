#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "agentloom/util.hpp"

namespace agentloom {

// ---------------------------------------------------------------------------
// Task goal
// ---------------------------------------------------------------------------

struct TaskGoal {
  std::string id;
  std::string text;           // natural-language instruction, nonempty
  std::string output_schema;  // optional structured-output description (JSON)
  int step_budget = 24;       // max decision cycles, >= 1
  std::string app_lock;       // optional package to keep foregrounded
};

// Throws PreconditionViolation on empty text or step_budget < 1.
void validate_goal(const TaskGoal& goal);

// ---------------------------------------------------------------------------
// Subgoal lifecycle
// ---------------------------------------------------------------------------

enum class SubgoalStatus { kPending, kInProgress, kCompleted, kFailed };
enum class LifecycleEvent { kStart, kConfirmComplete, kMarkFailed, kResetOnReplan };

const char* to_string(SubgoalStatus s);
const char* to_string(LifecycleEvent e);

struct IllegalTransition : std::logic_error {
  IllegalTransition(SubgoalStatus from, LifecycleEvent event);
  SubgoalStatus from;
  LifecycleEvent event;
};

// The fixed lifecycle table. Pending+Start -> InProgress;
// InProgress+ConfirmComplete -> Completed; InProgress+MarkFailed -> Failed;
// {Pending,InProgress}+ResetOnReplan -> Pending. Anything else throws.
SubgoalStatus transition_subgoal(SubgoalStatus current, LifecycleEvent event);

struct Subgoal {
  std::string id;
  std::string description;
  SubgoalStatus status = SubgoalStatus::kPending;
};

struct Plan {
  std::vector<Subgoal> subgoals;
  int revision = 1;  // strictly increases across replans

  Subgoal* find(std::string_view id);
  const Subgoal* find(std::string_view id) const;
  const Subgoal* active() const;  // the InProgress subgoal, if any
  const Subgoal* first_pending() const;
  bool all_completed() const;
  bool any_failed() const;
};

struct ValidationIssue {
  enum class Kind { kDuplicateId, kEmptyDescription, kMultipleActive };
  Kind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool valid() const { return issues.empty(); }
  std::string to_text() const;
};

// Report-only structural checks: duplicate ids, empty descriptions, more
// than one InProgress subgoal.
ValidationReport validate_plan(const Plan& plan);

// ---------------------------------------------------------------------------
// UI hierarchy
// ---------------------------------------------------------------------------

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
  bool contains_point(int px, int py) const {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
  bool contains_rect(const Rect& o) const {
    return o.x >= x && o.y >= y && o.x + o.w <= x + w && o.y + o.h <= y + h;
  }
  long long area() const { return 1ll * w * h; }
};

struct UiNode {
  std::string node_id;  // unique within a hierarchy snapshot
  std::optional<std::string> resource_id;
  std::optional<std::string> text;
  std::optional<std::string> content_desc;
  Rect bounds;
  bool focusable = false;
  bool focused = false;
  bool editable = false;
  std::vector<UiNode> children;
};

// Depth-first search helpers.
const UiNode* find_by_resource_id(const UiNode& root, std::string_view rid);
const UiNode* find_by_node_id(const UiNode& root, std::string_view node_id);
int count_nodes(const UiNode& root);

// Structural validity: child bounds inside parent bounds, node ids unique.
// Returns an error description or nullopt when the tree is well-formed.
std::optional<std::string> check_hierarchy(const UiNode& root);

// ---------------------------------------------------------------------------
// Device state snapshot handed to agents each cycle
// ---------------------------------------------------------------------------

struct DeviceState {
  std::string screenshot_digest;  // stable hash of the rendered screen
  UiNode hierarchy;
  std::string focused_package;
  std::string timestamp;  // ISO-8601; virtual clock in the simulator
  std::uint64_t seq = 0;  // monotone, bumped on every device mutation
};

// ---------------------------------------------------------------------------
// Selectors and action decisions
// ---------------------------------------------------------------------------

struct Point {
  int x = 0, y = 0;
};

struct SelectorBundle {
  std::optional<std::string> resource_id;
  std::optional<Point> coordinates;
  std::optional<std::string> text_match;

  bool any() const {
    return resource_id.has_value() || coordinates.has_value() ||
           text_match.has_value();
  }
  // Stable canonical rendering used in fingerprints and trace lines.
  std::string canonical() const;

  static SelectorBundle by_resource_id(std::string rid) {
    SelectorBundle b;
    b.resource_id = std::move(rid);
    return b;
  }
  static SelectorBundle by_text(std::string text) {
    SelectorBundle b;
    b.text_match = std::move(text);
    return b;
  }
  static SelectorBundle by_point(int x, int y) {
    SelectorBundle b;
    b.coordinates = Point{x, y};
    return b;
  }
};

enum class ActionKind {
  kTap,
  kSwipe,
  kTypeText,
  kBack,
  kLaunchApp,
  kSaveNote,
  kReadNote,
  kListNotes,
  kStartRecording,
  kStopRecording,
  kWait,
  kUnknown,
};

const char* to_string(ActionKind kind);
ActionKind action_kind_from_string(std::string_view name);

struct ActionDecision {
  ActionKind kind = ActionKind::kUnknown;
  std::string raw_kind;  // original string, kept for unknown-kind reporting
  std::optional<SelectorBundle> target;
  std::optional<std::string> payload;
  std::string reasoning;
};

// Structural constraints: TypeText requires target and payload, LaunchApp
// requires payload. Returns an error description or nullopt when valid.
std::optional<std::string> check_decision(const ActionDecision& d);

// Zero-or-more actions plus zero-or-more completion signals; the dual
// output that drives parallel branching.
struct CortexOutput {
  std::vector<ActionDecision> actions;
  std::vector<std::string> completions;  // subgoal ids, de-duplicated
  std::string pivot;                     // optional strategy-change note
};

// ---------------------------------------------------------------------------
// Message history
// ---------------------------------------------------------------------------

enum class Role {
  kSystem,
  kPlanner,
  kOrchestrator,
  kContextor,
  kCortex,
  kExecutor,
  kTool,
};

const char* to_string(Role role);
Role role_from_string(std::string_view name);

struct AgentMessage {
  Role role = Role::kSystem;
  std::string content;
  bool pinned = false;
  int cycle_index = 0;
};

using History = std::vector<AgentMessage>;

}  // namespace agentloom
