#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "agentloom/domain.hpp"
#include "agentloom/util.hpp"

namespace agentloom::exec {
struct ToolCall;
}

namespace agentloom::sim {

// ---------------------------------------------------------------------------
// Controller-facing types
// ---------------------------------------------------------------------------

struct FaultProfile {
  double char_drop_prob = 0.0;   // per typed character
  double focus_steal_prob = 0.0; // per focus call, silent failure
  int latency_ticks = 0;         // extra virtual seconds per action
  std::uint64_t rng_seed = 0;
};

// Named profiles used by the CLI / harness: none, keyboard, focus, slow.
FaultProfile fault_profile_by_name(const std::string& name);

struct FrameLog {
  std::vector<std::pair<std::uint64_t, std::string>> frames;  // (seq, digest)
};

// Deterministic textual summary of a frame log; stands in for the paper's
// vision-model video analysis.
std::string describe_frames(const FrameLog& log);

enum class SelectorTier { kResourceId, kCoordinates, kText };
const char* to_string(SelectorTier tier);

struct Resolved {
  const UiNode* node = nullptr;
  SelectorTier tier = SelectorTier::kResourceId;
};

// Resolution order: resource-id exact match, then smallest node containing
// the coordinates, then first node (document order) whose text matches
// exactly. Empty optional when every tier misses.
std::optional<Resolved> resolve_selector(const SelectorBundle& bundle,
                                         const UiNode& root);

// One line per node, depth shown as indentation; round-trips through
// parse_hierarchy byte-exactly.
std::string serialize_hierarchy(const UiNode& root);
UiNode parse_hierarchy(const std::string& text);

struct ActionResult {
  enum class Status { kOk, kFailed, kAborted };
  Status status = Status::kOk;
  std::string detail;
  std::uint64_t seq_before = 0;
  std::uint64_t seq_after = 0;

  bool ok() const { return status == Status::kOk; }
  static ActionResult failure(std::string detail, std::uint64_t seq) {
    return {Status::kFailed, std::move(detail), seq, seq};
  }
};

const char* to_string(ActionResult::Status status);

struct UnknownSnapshot : std::runtime_error {
  explicit UnknownSnapshot(const std::string& id)
      : std::runtime_error("unknown snapshot: " + id) {}
};

// Platform-agnostic automation surface. The simulator below is the
// reference implementation; real UIAutomator2/idb/WebDriverAgent drivers
// would implement the same interface.
class DeviceController {
 public:
  virtual ~DeviceController() = default;

  virtual DeviceState get_state() = 0;  // never mutates seq

  virtual ActionResult tap(const SelectorBundle& selector) = 0;
  virtual ActionResult swipe(const std::string& direction, int amount) = 0;
  virtual ActionResult type_text(const std::string& raw) = 0;
  virtual ActionResult press_back() = 0;
  virtual ActionResult launch_app(const std::string& package) = 0;
  virtual ActionResult focus(const SelectorBundle& selector) = 0;
  virtual ActionResult set_cursor_end(const SelectorBundle& selector) = 0;
  virtual ActionResult wait_tick() = 0;

  virtual ActionResult start_recording() = 0;
  virtual ActionResult stop_recording(FrameLog& out) = 0;

  virtual std::string snapshot() = 0;
  virtual void restore(const std::string& snapshot_id) = 0;
};

// Direct dispatch of a raw tool call onto controller primitives. Typing via
// this path is unverified; the verified six-step procedure lives in the
// execution layer.
ActionResult apply_action(DeviceController& device, const exec::ToolCall& call);

// ---------------------------------------------------------------------------
// Declarative app definitions
//
// Apps are loaded from JSON files: named screens, each a node list plus a
// transition table keyed by "element:action". See docs/formats.md.
// ---------------------------------------------------------------------------

using Record = std::map<std::string, std::string>;

struct NodeTemplate {
  std::string id;
  std::string text;          // may reference {pref:KEY} or {sel:COLL:FIELD}
  std::string content_desc;
  bool editable = false;
  bool focusable = false;
  std::string bind_collection;  // renders one child per record when set
  std::string item_text;        // per-record template, e.g. "{name}"
  int bind_offset = 0;          // first record shown (list paging)
  int bind_limit = -1;          // max records shown, -1 = all
};

struct DataOp {
  std::string op;  // append_record | set_pref | toggle_pref | clear_fields | select
  std::string collection;
  std::string key;
  std::string value;
  std::string screen;
  Record fields;  // append_record values; "{field:rid}" reads editor fields
};

struct TransitionDef {
  std::string next;  // empty = stay on screen
  std::vector<DataOp> ops;
  std::string require_nonempty_field;  // guard: rid that must hold text
  std::string guard_fail_next;         // screen taken when the guard fails
};

struct ScreenDef {
  std::string name;
  std::vector<NodeTemplate> nodes;
  std::map<std::string, TransitionDef> transitions;
};

struct SimAppDef {
  std::string package;
  std::string label;
  std::string initial_screen;
  std::map<std::string, std::string> initial_prefs;
  std::map<std::string, std::vector<Record>> initial_data;
  std::map<std::string, ScreenDef> screens;
};

SimAppDef load_app_definition(const std::string& json_text);
SimAppDef load_app_definition_file(const std::string& path);
std::vector<SimAppDef> load_apps_dir(const std::string& dir);

// ---------------------------------------------------------------------------
// The simulator
// ---------------------------------------------------------------------------

// Read-only view over final device data for success predicates.
struct AppDataView {
  std::string current_screen;
  std::map<std::string, std::vector<Record>> collections;
  std::map<std::string, std::string> prefs;
};

struct WorldView {
  DeviceState state;
  std::string foreground;
  std::map<std::string, AppDataView> apps;
};

class SimDevice : public DeviceController {
 public:
  SimDevice(std::vector<SimAppDef> apps, FaultProfile profile);

  DeviceState get_state() override;
  ActionResult tap(const SelectorBundle& selector) override;
  ActionResult swipe(const std::string& direction, int amount) override;
  ActionResult type_text(const std::string& raw) override;
  ActionResult press_back() override;
  ActionResult launch_app(const std::string& package) override;
  ActionResult focus(const SelectorBundle& selector) override;
  ActionResult set_cursor_end(const SelectorBundle& selector) override;
  ActionResult wait_tick() override;
  ActionResult start_recording() override;
  ActionResult stop_recording(FrameLog& out) override;
  std::string snapshot() override;
  void restore(const std::string& snapshot_id) override;

  WorldView export_world();
  const FaultProfile& profile() const { return profile_; }

 private:
  struct AppRuntime {
    std::string current_screen;
    std::map<std::string, std::string> fields;  // "screen|rid" -> text
    std::map<std::string, std::vector<Record>> data;
    std::map<std::string, std::string> prefs;
  };

  struct FocusRef {
    std::string package, screen, rid;
    bool operator==(const FocusRef&) const = default;
  };

  struct World {
    std::string foreground = "home";
    std::map<std::string, AppRuntime> apps;
    std::optional<FocusRef> focus;
    std::map<std::string, std::size_t> cursors;  // "pkg|screen|rid" -> pos
    std::uint64_t seq = 0;
    std::uint64_t ticks = 0;
    DetRng rng;
    bool recording = false;
    FrameLog frames;
  };

  // All of these assume mu_ is held.
  UiNode render_locked() const;
  UiNode render_screen_locked(const SimAppDef& def, const AppRuntime& app,
                              const std::string& screen_name) const;
  DeviceState state_locked() const;
  std::string digest_locked() const;
  void begin_mutation_locked();   // seq, ticks, tick-transitions
  void end_mutation_locked();     // frame capture while recording
  ActionResult fire_transition_locked(const std::string& trigger,
                                      std::optional<std::size_t> item_index,
                                      std::uint64_t seq_before);
  void apply_ops_locked(const std::vector<DataOp>& ops,
                        std::optional<std::size_t> item_index);
  void enter_screen_locked(const std::string& screen);
  std::string expand_text_locked(const AppRuntime& app,
                                 const std::string& tmpl) const;
  std::string field_key(const std::string& screen,
                        const std::string& rid) const;
  AppRuntime& fg_app_locked();
  const SimAppDef& fg_def_locked() const;

  std::map<std::string, SimAppDef> defs_;
  FaultProfile profile_;
  World w_;
  std::map<std::string, World> snapshots_;
  int snapshot_counter_ = 0;
  std::mutex mu_;  // device is a single logical actor
};

// Builds a device at the named starting snapshot. "home_default" is the
// standard preset: all apps installed with their seeded data, home screen
// foregrounded.
std::unique_ptr<SimDevice> make_device(const std::string& assets_dir,
                                       const std::string& preset,
                                       FaultProfile profile,
                                       std::uint64_t seed);

}  // namespace agentloom::sim
