#include "doctest.h"

#include <random>

#include "agentloom/sim_device.hpp"
#include "agentloom/toolcall.hpp"

using namespace agentloom;
using sim::SimDevice;

namespace {

const char* kAssets = AGENTLOOM_ASSETS_DIR;

std::unique_ptr<SimDevice> device_with(sim::FaultProfile profile,
                                       std::uint64_t seed = 1) {
  profile.rng_seed = seed;
  return std::make_unique<SimDevice>(sim::load_apps_dir(std::string(kAssets) + "/apps"),
                                     profile);
}

sim::ActionResult focus_and_type(SimDevice& dev, const std::string& rid,
                                 const std::string& text) {
  dev.launch_app("com.sim.contacts");
  dev.tap(SelectorBundle::by_resource_id("fab_add"));
  dev.focus(SelectorBundle::by_resource_id(rid));
  dev.set_cursor_end(SelectorBundle::by_resource_id(rid));
  return dev.type_text(text);
}

std::string field_text(SimDevice& dev, const std::string& rid) {
  DeviceState state = dev.get_state();
  const UiNode* node = find_by_resource_id(state.hierarchy, rid);
  REQUIRE(node != nullptr);
  return node->text.value_or("");
}

}  // namespace

TEST_CASE("app definitions load and render valid hierarchies") {
  auto dev = device_with({});
  DeviceState home = dev->get_state();
  CHECK(home.focused_package == "home");
  CHECK_FALSE(check_hierarchy(home.hierarchy).has_value());

  for (const std::string pkg :
       {"com.sim.contacts", "com.sim.notes", "com.sim.expenses",
        "com.sim.settings"}) {
    CHECK(dev->launch_app(pkg).ok());
    DeviceState state = dev->get_state();
    CHECK(state.focused_package == pkg);
    CHECK_FALSE(check_hierarchy(state.hierarchy).has_value());
  }
  CHECK_FALSE(dev->launch_app("com.sim.bogus").ok());
}

TEST_CASE("tap fires transitions and bumps seq") {
  auto dev = device_with({});
  dev->launch_app("com.sim.contacts");
  std::uint64_t seq = dev->get_state().seq;
  auto result = dev->tap(SelectorBundle::by_resource_id("fab_add"));
  CHECK(result.ok());
  CHECK(result.seq_after >= seq + 1);
  CHECK(find_by_resource_id(dev->get_state().hierarchy, "field_name"));
  // get_state never mutates seq.
  std::uint64_t after = dev->get_state().seq;
  CHECK(dev->get_state().seq == after);
}

TEST_CASE("typing without faults lands verbatim") {
  auto dev = device_with({});
  auto result = focus_and_type(*dev, "field_name", "Hello");
  CHECK(result.ok());
  CHECK(field_text(*dev, "field_name") == "Hello");
}

TEST_CASE("typing with no focused field is a failed result") {
  auto dev = device_with({});
  dev->launch_app("com.sim.contacts");
  auto result = dev->type_text("hi");
  CHECK_FALSE(result.ok());
  CHECK(result.detail == "NoFocusedField");
}

TEST_CASE("cursor starts where focus put it; set_cursor_end appends") {
  auto dev = device_with({});
  focus_and_type(*dev, "field_name", "Hi ");
  // Re-focus puts the cursor back at the start.
  dev->focus(SelectorBundle::by_resource_id("field_name"));
  dev->type_text("X");
  CHECK(field_text(*dev, "field_name") == "XHi ");
  dev->set_cursor_end(SelectorBundle::by_resource_id("field_name"));
  dev->type_text("Y");
  CHECK(field_text(*dev, "field_name") == "XHi Y");
  // Backspace deletes before the cursor, reliably.
  dev->type_text("\b\b");
  CHECK(field_text(*dev, "field_name") == "XHi");
}

TEST_CASE("character drops produce a strict subsequence, pinned by seed") {
  sim::FaultProfile profile;
  profile.char_drop_prob = 0.5;
  auto dev = device_with(profile, 7);
  auto result = focus_and_type(*dev, "field_name", "Hello");
  CHECK(result.ok());
  std::string typed = field_text(*dev, "field_name");
  // Subsequence check.
  std::size_t pos = 0;
  for (char c : typed) {
    pos = std::string("Hello").find(c, pos);
    REQUIRE(pos != std::string::npos);
    ++pos;
  }
  CHECK(typed.size() < 5);
  // Frozen from the seeded fixture run; detects engine or mapping drift.
  CHECK(typed == "Heo");
}

TEST_CASE("fault soundness: zero probabilities mean faithful typing") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    auto dev = device_with({}, rng());
    std::string text;
    for (int i = 0; i < static_cast<int>(1 + rng() % 10); ++i)
      text.push_back(static_cast<char>('a' + rng() % 26));
    focus_and_type(*dev, "field_name", text);
    CHECK(ends_with(field_text(*dev, "field_name"), text));
  }
}

TEST_CASE("selector resolution tiers") {
  auto dev = device_with({});
  dev->launch_app("com.sim.contacts");
  DeviceState state = dev->get_state();

  SUBCASE("resource id wins") {
    auto hit = sim::resolve_selector(SelectorBundle::by_resource_id("fab_add"),
                                     state.hierarchy);
    REQUIRE(hit.has_value());
    CHECK(hit->tier == sim::SelectorTier::kResourceId);
    CHECK(hit->node->node_id == "fab_add");
  }
  SUBCASE("missing id falls back to the smallest node under coordinates") {
    SelectorBundle bundle;
    bundle.resource_id = "missing";
    const UiNode* fab = find_by_resource_id(state.hierarchy, "fab_add");
    bundle.coordinates = Point{fab->bounds.x + 1, fab->bounds.y + 1};
    auto hit = sim::resolve_selector(bundle, state.hierarchy);
    REQUIRE(hit.has_value());
    CHECK(hit->tier == sim::SelectorTier::kCoordinates);
    CHECK(hit->node->node_id == "fab_add");
  }
  SUBCASE("text ties break in document order") {
    // Two Save buttons: contacts editor and a handmade tree.
    UiNode root;
    root.node_id = "r";
    root.bounds = {0, 0, 100, 100};
    UiNode a, b;
    a.node_id = "first";
    a.text = "Save";
    a.bounds = {0, 0, 10, 10};
    b.node_id = "second";
    b.text = "Save";
    b.bounds = {0, 20, 10, 10};
    root.children = {a, b};
    auto hit = sim::resolve_selector(SelectorBundle::by_text("Save"), root);
    REQUIRE(hit.has_value());
    CHECK(hit->tier == sim::SelectorTier::kText);
    CHECK(hit->node->node_id == "first");
  }
  SUBCASE("all tiers missing") {
    SelectorBundle bundle;
    bundle.resource_id = "nope";
    bundle.text_match = "nothing here";
    CHECK_FALSE(sim::resolve_selector(bundle, state.hierarchy).has_value());
  }
  SUBCASE("empty bundle violates the precondition") {
    CHECK_THROWS_AS(sim::resolve_selector(SelectorBundle{}, state.hierarchy),
                    PreconditionViolation);
  }
}

TEST_CASE("hierarchy serialization round-trips") {
  auto dev = device_with({});
  for (const std::string pkg : {"com.sim.notes", "com.sim.settings"}) {
    dev->launch_app(pkg);
    UiNode root = dev->get_state().hierarchy;
    std::string text = sim::serialize_hierarchy(root);
    UiNode parsed = sim::parse_hierarchy(text);
    CHECK(sim::serialize_hierarchy(parsed) == text);
    CHECK(static_cast<int>(split_lines(text).size()) == count_nodes(root));
  }
}

TEST_CASE("fifty-node tree serializes to fifty lines") {
  UiNode root;
  root.node_id = "root";
  root.bounds = {0, 0, 10000, 10000};
  UiNode* cursor = &root;
  for (int i = 0; i < 49; ++i) {
    UiNode child;
    child.node_id = "n" + std::to_string(i);
    child.text = "line \"quoted\" text";
    child.bounds = {i, i, 100, 100};
    cursor->children.push_back(child);
    if (i % 2 == 0) cursor = &cursor->children.back();
  }
  std::string text = sim::serialize_hierarchy(root);
  CHECK(split_lines(text).size() == 50);
  CHECK(sim::serialize_hierarchy(sim::parse_hierarchy(text)) == text);
}

TEST_CASE("snapshot and restore") {
  auto dev = device_with({});
  dev->launch_app("com.sim.settings");
  std::string before = sim::serialize_hierarchy(dev->get_state().hierarchy);
  std::string snap = dev->snapshot();
  std::uint64_t seq_at_snap = dev->get_state().seq;

  dev->tap(SelectorBundle::by_resource_id("row_wifi"));
  CHECK(sim::serialize_hierarchy(dev->get_state().hierarchy) != before);

  dev->restore(snap);
  CHECK(sim::serialize_hierarchy(dev->get_state().hierarchy) == before);
  // seq continues monotonically across restore.
  CHECK(dev->get_state().seq > seq_at_snap);

  CHECK_THROWS_AS(dev->restore("snap_404"), sim::UnknownSnapshot);
}

TEST_CASE("restore plus identical actions replays to an identical digest") {
  sim::FaultProfile profile;
  profile.char_drop_prob = 0.4;
  auto dev = device_with(profile, 21);
  dev->launch_app("com.sim.contacts");
  std::string snap = dev->snapshot();

  auto scriptlet = [&] {
    dev->tap(SelectorBundle::by_resource_id("fab_add"));
    dev->focus(SelectorBundle::by_resource_id("field_name"));
    dev->type_text("Maria");
    dev->tap(SelectorBundle::by_resource_id("btn_save"));
    return dev->get_state().screenshot_digest;
  };
  std::string first = scriptlet();
  dev->restore(snap);
  std::string second = scriptlet();
  CHECK(first == second);
}

TEST_CASE("same seed and action sequence give identical final digests") {
  auto run_once = [&] {
    sim::FaultProfile profile;
    profile.char_drop_prob = 0.3;
    auto dev = device_with(profile, 1234);
    dev->launch_app("com.sim.notes");
    dev->tap(SelectorBundle::by_resource_id("fab_new"));
    dev->focus(SelectorBundle::by_resource_id("field_title"));
    dev->type_text("alpha beta");
    dev->tap(SelectorBundle::by_resource_id("btn_save"));
    return dev->get_state().screenshot_digest;
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("frame log captures strictly increasing seqs between start/stop") {
  auto dev = device_with({});
  dev->launch_app("com.sim.settings");
  dev->start_recording();
  dev->tap(SelectorBundle::by_resource_id("btn_sync"));
  dev->wait_tick();
  dev->wait_tick();
  sim::FrameLog log;
  dev->stop_recording(log);
  REQUIRE(log.frames.size() >= 4);
  for (std::size_t i = 1; i < log.frames.size(); ++i)
    CHECK(log.frames[i].first > log.frames[i - 1].first);
  CHECK(contains(sim::describe_frames(log), "distinct=4"));
}

TEST_CASE("timed transitions drive the sync flow") {
  auto dev = device_with({});
  dev->launch_app("com.sim.settings");
  dev->tap(SelectorBundle::by_resource_id("btn_sync"));
  CHECK(find_by_resource_id(dev->get_state().hierarchy, "lbl_sync"));
  dev->wait_tick();
  dev->wait_tick();
  const UiNode* label =
      find_by_resource_id(dev->get_state().hierarchy, "lbl_sync");
  REQUIRE(label);
  CHECK(label->text == "Sync complete");
  dev->tap(SelectorBundle::by_resource_id("btn_ok"));
  const UiNode* last =
      find_by_resource_id(dev->get_state().hierarchy, "lbl_last_sync");
  REQUIRE(last);
  CHECK(last->text == "Last sync: done");
}

TEST_CASE("apply_action dispatches raw tool calls") {
  auto dev = device_with({});
  exec::ToolCall launch;
  launch.name = ActionKind::kLaunchApp;
  launch.payload = "com.sim.expenses";
  CHECK(sim::apply_action(*dev, launch).ok());
  CHECK(dev->get_state().focused_package == "com.sim.expenses");

  exec::ToolCall tap;
  tap.name = ActionKind::kTap;
  tap.selector = SelectorBundle::by_resource_id("item_expenses_1");
  CHECK(sim::apply_action(*dev, tap).ok());
  const UiNode* title =
      find_by_resource_id(dev->get_state().hierarchy, "lbl_title");
  REQUIRE(title);
  CHECK(title->text == "Taxi");

  exec::ToolCall note;
  note.name = ActionKind::kSaveNote;
  note.payload = "k=v";
  CHECK_FALSE(sim::apply_action(*dev, note).ok());  // not a device action

  exec::ToolCall unknown;
  unknown.raw_name = "frobnicate";
  CHECK_FALSE(sim::apply_action(*dev, unknown).ok());
}

TEST_CASE("guarded transition: saving a contact without a name") {
  auto dev = device_with({});
  dev->launch_app("com.sim.contacts");
  dev->tap(SelectorBundle::by_resource_id("fab_add"));
  dev->tap(SelectorBundle::by_resource_id("btn_save"));
  // Guard failed: error dialog, nothing stored.
  CHECK(find_by_resource_id(dev->get_state().hierarchy, "btn_dismiss"));
  auto world = dev->export_world();
  CHECK(world.apps.at("com.sim.contacts").collections.at("contacts").empty());
}

TEST_CASE("focus steal fault silently drops focus") {
  sim::FaultProfile profile;
  profile.focus_steal_prob = 1.0;  // always steal
  auto dev = device_with(profile, 5);
  dev->launch_app("com.sim.contacts");
  dev->tap(SelectorBundle::by_resource_id("fab_add"));
  auto focus = dev->focus(SelectorBundle::by_resource_id("field_name"));
  CHECK(focus.ok());  // reported success
  auto typed = dev->type_text("x");
  CHECK_FALSE(typed.ok());  // but nothing was focused
  CHECK(typed.detail == "NoFocusedField");
}
