#include "doctest.h"

#include <random>

#include "agentloom/domain.hpp"

using namespace agentloom;

TEST_CASE("subgoal lifecycle table") {
  CHECK(transition_subgoal(SubgoalStatus::kPending, LifecycleEvent::kStart) ==
        SubgoalStatus::kInProgress);
  CHECK(transition_subgoal(SubgoalStatus::kInProgress,
                           LifecycleEvent::kConfirmComplete) ==
        SubgoalStatus::kCompleted);
  CHECK(transition_subgoal(SubgoalStatus::kInProgress,
                           LifecycleEvent::kMarkFailed) ==
        SubgoalStatus::kFailed);
  CHECK(transition_subgoal(SubgoalStatus::kPending,
                           LifecycleEvent::kResetOnReplan) ==
        SubgoalStatus::kPending);
  CHECK(transition_subgoal(SubgoalStatus::kInProgress,
                           LifecycleEvent::kResetOnReplan) ==
        SubgoalStatus::kPending);

  // Terminal states reject everything, including replan resets.
  CHECK_THROWS_AS(
      transition_subgoal(SubgoalStatus::kCompleted, LifecycleEvent::kStart),
      IllegalTransition);
  CHECK_THROWS_AS(transition_subgoal(SubgoalStatus::kCompleted,
                                     LifecycleEvent::kResetOnReplan),
                  IllegalTransition);
  CHECK_THROWS_AS(transition_subgoal(SubgoalStatus::kFailed,
                                     LifecycleEvent::kResetOnReplan),
                  IllegalTransition);
  CHECK_THROWS_AS(transition_subgoal(SubgoalStatus::kPending,
                                     LifecycleEvent::kConfirmComplete),
                  IllegalTransition);
  CHECK_THROWS_AS(transition_subgoal(SubgoalStatus::kPending,
                                     LifecycleEvent::kMarkFailed),
                  IllegalTransition);
  CHECK_THROWS_AS(transition_subgoal(SubgoalStatus::kInProgress,
                                     LifecycleEvent::kStart),
                  IllegalTransition);
}

TEST_CASE("lifecycle closure under random event sequences") {
  // Every accepted transition matches a legal table entry; every rejected
  // one leaves the state untouched.
  std::mt19937_64 rng(42);
  const LifecycleEvent events[] = {
      LifecycleEvent::kStart, LifecycleEvent::kConfirmComplete,
      LifecycleEvent::kMarkFailed, LifecycleEvent::kResetOnReplan};
  for (int trial = 0; trial < 500; ++trial) {
    SubgoalStatus status = SubgoalStatus::kPending;
    for (int step = 0; step < 40; ++step) {
      LifecycleEvent event = events[rng() % 4];
      SubgoalStatus before = status;
      try {
        status = transition_subgoal(status, event);
      } catch (const IllegalTransition&) {
        CHECK(status == before);
        continue;
      }
      bool legal =
          (before == SubgoalStatus::kPending && event == LifecycleEvent::kStart &&
           status == SubgoalStatus::kInProgress) ||
          (before == SubgoalStatus::kInProgress &&
           event == LifecycleEvent::kConfirmComplete &&
           status == SubgoalStatus::kCompleted) ||
          (before == SubgoalStatus::kInProgress &&
           event == LifecycleEvent::kMarkFailed &&
           status == SubgoalStatus::kFailed) ||
          ((before == SubgoalStatus::kPending ||
            before == SubgoalStatus::kInProgress) &&
           event == LifecycleEvent::kResetOnReplan &&
           status == SubgoalStatus::kPending);
      CHECK(legal);
    }
  }
}

TEST_CASE("validate_plan") {
  Plan plan;
  plan.subgoals = {{"a", "one", SubgoalStatus::kPending},
                   {"b", "two", SubgoalStatus::kPending},
                   {"c", "three", SubgoalStatus::kPending}};
  CHECK(validate_plan(plan).valid());

  SUBCASE("duplicate id") {
    plan.subgoals.push_back({"a", "again", SubgoalStatus::kPending});
    auto report = validate_plan(plan);
    CHECK_FALSE(report.valid());
    CHECK(contains(report.to_text(), "DuplicateId(a)"));
  }
  SUBCASE("two active subgoals, constructed by bypassing transitions") {
    plan.subgoals[0].status = SubgoalStatus::kInProgress;
    plan.subgoals[1].status = SubgoalStatus::kInProgress;
    auto report = validate_plan(plan);
    CHECK_FALSE(report.valid());
    CHECK(contains(report.to_text(), "MultipleActive"));
  }
  SUBCASE("empty description") {
    plan.subgoals[1].description = "  ";
    auto report = validate_plan(plan);
    CHECK_FALSE(report.valid());
    CHECK(contains(report.to_text(), "EmptyDescription(b)"));
  }
}

TEST_CASE("goal validation") {
  TaskGoal goal;
  goal.text = "do something";
  goal.step_budget = 1;
  CHECK_NOTHROW(validate_goal(goal));
  goal.text = "   ";
  CHECK_THROWS_AS(validate_goal(goal), PreconditionViolation);
  goal.text = "x";
  goal.step_budget = 0;
  CHECK_THROWS_AS(validate_goal(goal), PreconditionViolation);
}

TEST_CASE("hierarchy structural checks") {
  UiNode root;
  root.node_id = "root";
  root.bounds = {0, 0, 100, 100};
  UiNode child;
  child.node_id = "child";
  child.bounds = {10, 10, 50, 50};
  root.children.push_back(child);
  CHECK_FALSE(check_hierarchy(root).has_value());

  SUBCASE("child escaping parent bounds") {
    root.children[0].bounds = {90, 90, 50, 50};
    auto error = check_hierarchy(root);
    REQUIRE(error.has_value());
    CHECK(contains(*error, "escapes"));
  }
  SUBCASE("duplicate node id") {
    UiNode dup = child;
    root.children.push_back(dup);
    auto error = check_hierarchy(root);
    REQUIRE(error.has_value());
    CHECK(contains(*error, "duplicate"));
  }
}

TEST_CASE("action decision constraints") {
  ActionDecision tap;
  tap.kind = ActionKind::kTap;
  tap.raw_kind = "tap";
  CHECK(check_decision(tap).has_value());  // tap without target
  tap.target = SelectorBundle::by_resource_id("x");
  CHECK_FALSE(check_decision(tap).has_value());

  ActionDecision type;
  type.kind = ActionKind::kTypeText;
  type.raw_kind = "type_text";
  type.target = SelectorBundle::by_resource_id("field");
  CHECK(check_decision(type).has_value());  // missing payload
  type.payload = "hello";
  CHECK_FALSE(check_decision(type).has_value());

  ActionDecision launch;
  launch.kind = ActionKind::kLaunchApp;
  launch.raw_kind = "launch_app";
  CHECK(check_decision(launch).has_value());  // missing package
  launch.payload = "com.sim.notes";
  CHECK_FALSE(check_decision(launch).has_value());

  ActionDecision unknown;
  unknown.raw_kind = "frobnicate";
  CHECK(check_decision(unknown).has_value());
}

TEST_CASE("selector canonical form is stable") {
  SelectorBundle bundle;
  bundle.resource_id = "fab";
  bundle.coordinates = Point{10, 20};
  bundle.text_match = "Save";
  CHECK(bundle.canonical() == "rid:fab|pt:10,20|text:Save");
  CHECK(SelectorBundle::by_text("Save").canonical() == "text:Save");
  CHECK_FALSE(SelectorBundle{}.any());
}
