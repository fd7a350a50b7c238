#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "agentloom/backend.hpp"
#include "agentloom/domain.hpp"

namespace agentloom::oracle {

// ---------------------------------------------------------------------------
// Task scripts: the canned know-how behind the deterministic responder.
// One JSON file per task under <assets>/scripts; wording of subgoals and
// responses is fixed by these fixtures.
// ---------------------------------------------------------------------------

struct Directive {
  std::string kind;  // launch|tap|swipe|back|wait|type|save_note|read_note|
                     // record_start|record_stop
  std::string rid;
  std::string text_match;
  std::string pkg;
  std::string direction = "down";
  std::string text;        // literal payload for type
  std::string note;        // note key: type payload becomes {note:KEY}
  std::string key;         // save_note/read_note key
  std::string value;       // save_note literal value
  std::string from_rid;    // save_note value read from this node's text
  int expect_distinct_min = 0;  // record_stop success criterion
  std::vector<Directive> fallback;  // pivot actions after a detected cycle
};

struct SubgoalScript {
  std::string id;  // base id; plans prefix it with the revision
  std::string description;
  std::vector<Directive> dirs;
  bool batch = false;  // emit all remaining directives in one decision
};

struct PlanScript {
  std::vector<SubgoalScript> subgoals;
};

struct TaskScript {
  std::string task_id;
  std::string goal_text;
  bool dual = false;  // piggyback the next subgoal's first action on completion
  std::vector<PlanScript> plans;  // index = revision - 1, clamped
};

TaskScript parse_task_script(const std::string& json_text);

class ScriptSet {
 public:
  static ScriptSet from_assets(const std::string& assets_dir);

  const TaskScript* find_by_goal(const std::string& goal_text) const;
  const TaskScript* find_by_id(const std::string& task_id) const;
  std::vector<std::string> task_ids() const;

  void add(TaskScript script);

 private:
  std::vector<TaskScript> scripts_;
};

// ---------------------------------------------------------------------------
// OracleBackend: a deterministic rule-based completion provider. Responses
// are pure functions of (role, prompt); every response is recorded into a
// ScriptBook so runs can be replayed verbatim through ScriptedBackend.
// ---------------------------------------------------------------------------

class OracleBackend : public llm::LlmBackend {
 public:
  OracleBackend(const ScriptSet& scripts, llm::ModelAssignment models);

  llm::Completion complete(const llm::CompletionRequest& request) override;
  std::string kind() const override { return "oracle"; }

  // Everything answered so far, keyed by prompt fingerprint.
  llm::ScriptBook book() const;

 private:
  const ScriptSet& scripts_;
  llm::ModelAssignment models_;
  llm::ScriptBook book_;
  mutable std::mutex mu_;
};

// Exposed for tests: the raw response rule.
std::string oracle_respond(const ScriptSet& scripts,
                           const llm::CompletionRequest& request);

}  // namespace agentloom::oracle
