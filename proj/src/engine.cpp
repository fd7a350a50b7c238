#include "agentloom/engine.hpp"

#include <future>
#include <set>
#include <sstream>

#include "agentloom/verified_exec.hpp"
#include "json.hpp"

namespace agentloom::engine {

using nlohmann::ordered_json;

std::string BranchSet::summary() const {
  std::vector<std::string> parts;
  if (orchestrator) parts.push_back("orchestrator");
  if (executor) parts.push_back("executor");
  if (stall) parts.push_back("stall");
  return join(parts, "+");
}

BranchSet branch_after_cortex(const CortexOutput& output) {
  BranchSet set;
  set.orchestrator = !output.completions.empty();
  set.executor = !output.actions.empty();
  set.stall = !set.orchestrator && !set.executor;
  return set;
}

std::string RouteDecision::summary() const {
  switch (kind) {
    case Kind::kContinue: return "continue";
    case Kind::kReplan: return "replan";
    case Kind::kTerminate:
      return success ? "terminate success=true" : "terminate success=false";
  }
  return "?";
}

RouteDecision route_after_convergence(Plan& plan, int stall_count,
                                      int budget_left, int stall_threshold) {
  if (plan.any_failed()) return {RouteDecision::Kind::kReplan, false};
  if (plan.all_completed()) return {RouteDecision::Kind::kTerminate, true};
  if (budget_left <= 0) return {RouteDecision::Kind::kTerminate, false};
  if (stall_count >= stall_threshold) {
    if (Subgoal* active = const_cast<Subgoal*>(plan.active()))
      active->status =
          transition_subgoal(active->status, LifecycleEvent::kMarkFailed);
    return {RouteDecision::Kind::kReplan, false};
  }
  return {RouteDecision::Kind::kContinue, false};
}

void converge(const std::vector<BranchReport>& reports) {
  for (const auto& report : reports) {
    if (report.abnormal)
      throw BranchPanic("branch " + report.name +
                        " terminated abnormally: " + report.error);
  }
}

// ---------------------------------------------------------------------------
// run_task
// ---------------------------------------------------------------------------

namespace {

struct Runner {
  Runner(const TaskGoal& goal, sim::DeviceController& device,
         llm::LlmBackend& backend, const agents::PromptLibrary& prompts,
         AblationFlags flags, RunParams params)
      : goal(goal),
        device(device),
        backend(backend),
        prompts(prompts),
        flags(flags),
        params(std::move(params)) {}

  const TaskGoal& goal;
  sim::DeviceController& device;
  llm::LlmBackend& backend;
  const agents::PromptLibrary& prompts;
  AblationFlags flags;
  RunParams params;

  RunResult result;
  Scratchpad pad;
  History history;
  std::vector<metacog::HistoryEntry> entries;
  std::uint64_t last_action_seq = 0;
  int stall_count = 0;
  int cycle = 0;

  // Pending trace records from a node; committed in deterministic order.
  struct Sink {
    std::vector<TraceRecord> records;
    std::vector<agents::PromptLogEntry> prompt_log;
  };

  agents::AgentContext make_context(Sink& sink, const std::string& label) {
    agents::AgentContext ctx;
    ctx.backend = &backend;
    ctx.prompts = &prompts;
    ctx.schema_retries = params.schema_retries;
    ctx.prompt_log = &sink.prompt_log;
    ctx.on_call = [this, &sink, label](Role, const std::string& prompt,
                                       const llm::Completion& completion) {
      TraceRecord record;
      record.run_id = params.run_id;
      record.cycle_index = cycle;
      record.node = label;
      record.input_digest = digest_hex(prompt);
      record.output_digest = digest_hex(completion.text);
      record.usage = completion.usage;
      sink.records.push_back(std::move(record));
    };
    return ctx;
  }

  void commit(Sink& sink) {
    for (auto& record : sink.records) {
      record.start_ordinal = result.trace.next_ordinal();
      record.end_ordinal = result.trace.next_ordinal();
      result.trace.append(std::move(record));
    }
    sink.records.clear();
    for (auto& entry : sink.prompt_log)
      result.prompts.push_back(std::move(entry));
    sink.prompt_log.clear();
  }

  void emit(const std::string& node, const std::string& status,
            const std::string& detail, const std::string& in_digest = "",
            const std::string& out_digest = "") {
    TraceRecord record;
    record.run_id = params.run_id;
    record.cycle_index = cycle;
    record.node = node;
    record.start_ordinal = result.trace.next_ordinal();
    record.end_ordinal = result.trace.next_ordinal();
    record.input_digest = in_digest;
    record.output_digest = out_digest;
    record.status = status;
    record.detail = detail;
    result.trace.append(std::move(record));
  }

  void append_message(Role role, std::string content, bool pinned = false) {
    history.push_back({role, std::move(content), pinned, cycle});
  }

  std::string tool_message(const exec::StepOutcome& step) {
    ordered_json j;
    j["call"] = to_string(step.call.name);
    if (step.call.selector) j["selector"] = step.call.selector->canonical();
    if (step.call.payload) j["payload"] = *step.call.payload;
    j["ok"] = step.result.ok();
    j["status"] = sim::to_string(step.result.status);
    j["detail"] = step.result.detail;
    j["seq"] = step.result.seq_after;
    if (step.feedback) {
      j["verified"] = step.feedback->verified;
      j["attempts"] = step.feedback->attempts;
      j["actual"] = step.feedback->actual;
    }
    if (!step.tool_output.empty()) j["value"] = step.tool_output;
    j["reasoning"] = step.call.reasoning;
    return j.dump();
  }

  // Outcome of one branch; merged after the barrier in fixed order.
  struct BranchOutcome {
    Sink sink;
    std::vector<AgentMessage> messages;
    std::vector<metacog::HistoryEntry> new_entries;
    std::uint64_t last_seq = 0;
    std::vector<std::string> audit;  // plan transitions, for the trace
    bool abnormal = false;
    std::string error;
    std::exception_ptr backend_error;  // propagated as-is
  };

  BranchOutcome run_executor_branch(const std::vector<ActionDecision>& actions,
                                    std::uint64_t state_fp,
                                    const std::string& subgoal_id) {
    BranchOutcome outcome;
    try {
      agents::AgentContext ctx = make_context(outcome.sink, "executor");
      std::vector<exec::ToolCall> calls =
          agents::execute_decision(actions, ctx);
      std::vector<exec::StepOutcome> steps =
          exec::execute_sequential(calls, device, &pad, flags);
      for (std::size_t i = 0; i < steps.size(); ++i) {
        const exec::StepOutcome& step = steps[i];
        TraceRecord record;
        record.run_id = params.run_id;
        record.cycle_index = cycle;
        record.node = "tool:" + std::string(to_string(step.call.name));
        record.input_digest = digest_hex(
            step.call.selector ? step.call.selector->canonical()
                               : step.call.payload.value_or(""));
        record.output_digest = digest_hex(step.result.detail);
        record.status = sim::to_string(step.result.status);
        std::ostringstream detail;
        detail << step.result.detail << " seq:" << step.result.seq_before
               << "->" << step.result.seq_after;
        record.detail = detail.str();
        outcome.sink.records.push_back(std::move(record));

        outcome.messages.push_back(
            {Role::kTool, tool_message(step), false, cycle});
        if (step.result.status != sim::ActionResult::Status::kAborted) {
          metacog::HistoryEntry entry;
          entry.cycle_index = cycle;
          entry.state_fingerprint = state_fp;
          entry.action_fingerprint = metacog::action_fingerprint(actions[i]);
          entry.subgoal_id = subgoal_id;
          entry.ok = step.result.ok();
          outcome.new_entries.push_back(entry);
        }
        outcome.last_seq = std::max(outcome.last_seq, step.result.seq_after);
      }
    } catch (const llm::MissingScriptEntry&) {
      outcome.backend_error = std::current_exception();
    } catch (const llm::TransportError&) {
      outcome.backend_error = std::current_exception();
    } catch (const std::exception& e) {
      outcome.abnormal = true;
      outcome.error = e.what();
    }
    return outcome;
  }

  BranchOutcome run_orchestrator_branch(Plan& plan,
                                        const std::vector<std::string>& claims,
                                        const History& history_snapshot) {
    BranchOutcome outcome;
    try {
      agents::AgentContext ctx = make_context(outcome.sink, "orchestrator");
      agents::OrchestratorVerdict verdict =
          agents::orchestrate(plan, claims, history_snapshot, ctx);

      for (const auto& id : verdict.confirmed) {
        Subgoal* sg = plan.find(id);
        SubgoalStatus from = sg->status;
        sg->status =
            transition_subgoal(sg->status, LifecycleEvent::kConfirmComplete);
        outcome.audit.push_back(id + ":" + to_string(from) + "->" +
                                to_string(sg->status));
      }
      for (const auto& id : verdict.rejected) {
        outcome.messages.push_back(
            {Role::kOrchestrator,
             "rejected completion of " + id + ": " +
                 verdict.reject_reasons[id],
             false, cycle});
      }
      if (verdict.advance_to) {
        Subgoal* next = plan.find(*verdict.advance_to);
        if (next && next->status == SubgoalStatus::kPending) {
          next->status =
              transition_subgoal(next->status, LifecycleEvent::kStart);
          outcome.audit.push_back(*verdict.advance_to + ":Pending->InProgress");
        }
      } else if (!plan.active()) {
        // Keep the run live when the verdict omitted the next subgoal.
        if (const Subgoal* pending = plan.first_pending()) {
          Subgoal* next = plan.find(pending->id);
          next->status =
              transition_subgoal(next->status, LifecycleEvent::kStart);
          outcome.audit.push_back(next->id + ":Pending->InProgress (auto)");
        }
      }
      std::ostringstream msg;
      msg << "confirmed=[" << join(verdict.confirmed, ",") << "]";
      if (!verdict.rejected.empty())
        msg << " rejected=[" << join(verdict.rejected, ",") << "]";
      if (verdict.advance_to) msg << " advance_to=" << *verdict.advance_to;
      outcome.messages.push_back(
          {Role::kOrchestrator, msg.str(), false, cycle});
    } catch (const llm::MissingScriptEntry&) {
      outcome.backend_error = std::current_exception();
    } catch (const llm::TransportError&) {
      outcome.backend_error = std::current_exception();
    } catch (const std::exception& e) {
      outcome.abnormal = true;
      outcome.error = e.what();
    }
    return outcome;
  }

  void merge_branch(BranchOutcome& outcome) {
    commit(outcome.sink);
    for (auto& msg : outcome.messages) history.push_back(std::move(msg));
    for (auto& entry : outcome.new_entries) entries.push_back(entry);
    last_action_seq = std::max(last_action_seq, outcome.last_seq);
  }

  void replan(Plan& plan, int next_revision) {
    std::ostringstream failure;
    for (const auto& sg : plan.subgoals)
      if (sg.status == SubgoalStatus::kFailed)
        failure << "subgoal " << sg.id << " failed: " << sg.description
                << ". ";
    if (failure.str().empty()) failure << "previous plan stalled. ";

    std::vector<Subgoal> completed;
    for (auto& sg : plan.subgoals) {
      if (sg.status == SubgoalStatus::kCompleted) {
        completed.push_back(sg);
      } else if (sg.status == SubgoalStatus::kPending ||
                 sg.status == SubgoalStatus::kInProgress) {
        // Audited reset; the replanned remainder replaces these.
        sg.status =
            transition_subgoal(sg.status, LifecycleEvent::kResetOnReplan);
      }
    }

    Sink sink;
    agents::AgentContext ctx = make_context(sink, "planner");
    agents::PlanRequest request;
    request.goal = goal;
    request.failure_context = failure.str();
    request.preserve_completed = completed;
    request.revision = next_revision;
    Plan next = agents::plan_task(request, ctx);
    commit(sink);

    plan = std::move(next);
    if (const Subgoal* pending = plan.first_pending()) {
      Subgoal* first = plan.find(pending->id);
      first->status = transition_subgoal(first->status, LifecycleEvent::kStart);
      emit("orchestrator", "ok",
           "replan revision=" + std::to_string(plan.revision) + "; start:" +
               first->id);
    } else {
      emit("orchestrator", "ok",
           "replan revision=" + std::to_string(plan.revision));
    }
    stall_count = 0;
  }

  void finish(const RouteDecision& route) {
    result.goal_completed = route.success;
    if (route.kind == RouteDecision::Kind::kTerminate && !route.success)
      result.error = "BudgetExhausted";
  }

  RunResult run_multi_agent() {
    Plan plan;
    {
      Sink sink;
      agents::AgentContext ctx = make_context(sink, "planner");
      agents::PlanRequest request;
      request.goal = goal;
      plan = agents::plan_task(request, ctx);
      commit(sink);
    }
    {
      Subgoal* first = plan.find(plan.first_pending()->id);
      first->status = transition_subgoal(first->status, LifecycleEvent::kStart);
      emit("orchestrator", "ok", "init; start:" + first->id);
    }

    RouteDecision route{RouteDecision::Kind::kContinue, false};
    for (cycle = 1; cycle <= goal.step_budget; ++cycle) {
      pad.set_cycle(cycle);

      DeviceState state = agents::gather_context(device, goal);
      if (state.seq < last_action_seq)
        throw std::logic_error("stale device state reached the Cortex");
      emit("contextor", "ok", "seq=" + std::to_string(state.seq));
      append_message(Role::kContextor,
                     "Time: " + state.timestamp + " | Package: " +
                         state.focused_package +
                         " | Seq: " + std::to_string(state.seq));

      std::optional<metacog::MetacogReport> report;
      if (flags.metacog) {
        report = metacog::evaluate(entries, plan, params.metacog_window,
                                   params.stagnation_k);
        std::ostringstream detail;
        detail << "cycle="
               << (report->cycle
                       ? "p" + std::to_string(report->cycle->period)
                       : "none")
               << " stagnant=" << (report->stagnant ? "true" : "false")
               << " evidence=" << report->completed_evidence.size();
        emit("metacog", "ok", detail.str());
      }

      if (!plan.active()) {
        if (const Subgoal* pending = plan.first_pending()) {
          Subgoal* next = plan.find(pending->id);
          next->status =
              transition_subgoal(next->status, LifecycleEvent::kStart);
          emit("orchestrator", "ok", "start:" + next->id);
        }
      }
      const Subgoal* active = plan.active();

      CortexOutput output;
      if (active) {
        Sink sink;
        agents::AgentContext ctx = make_context(sink, "cortex");
        output = agents::decide(*active, state, history, &pad, report, ctx,
                                flags);
        commit(sink);
      }
      const std::string decision_json = agents::cortex_output_to_json(output);
      const std::uint64_t state_fp = metacog::state_fingerprint(state);

      // Unknown completion ids never reach the orchestrator precondition.
      std::vector<std::string> claims;
      for (const auto& id : output.completions) {
        if (plan.find(id))
          claims.push_back(id);
        else
          append_message(Role::kOrchestrator,
                         "dropped completion claim for unknown subgoal " + id);
      }
      output.completions = claims;

      emit("decision", "ok",
           "actions=" + std::to_string(output.actions.size()) +
               " completions=" + std::to_string(output.completions.size()) +
               " seq=" + std::to_string(state.seq),
           digest_hex(decision_json), digest_hex(decision_json));
      append_message(Role::kCortex, decision_json);

      BranchSet branches = branch_after_cortex(output);
      if (branches.stall)
        ++stall_count;
      else
        stall_count = 0;
      emit("branch", "ok", branches.summary());

      BranchOutcome exec_outcome, orch_outcome;
      const std::string subgoal_id = active ? active->id : "";
      if (branches.executor && branches.orchestrator &&
          params.concurrent_branches) {
        History snapshot = history;
        auto exec_future = std::async(std::launch::async, [&] {
          return run_executor_branch(output.actions, state_fp, subgoal_id);
        });
        auto orch_future = std::async(std::launch::async, [&] {
          return run_orchestrator_branch(plan, output.completions, snapshot);
        });
        exec_outcome = exec_future.get();
        orch_outcome = orch_future.get();
      } else {
        if (branches.executor)
          exec_outcome =
              run_executor_branch(output.actions, state_fp, subgoal_id);
        if (branches.orchestrator)
          orch_outcome =
              run_orchestrator_branch(plan, output.completions, history);
      }

      if (exec_outcome.backend_error)
        std::rethrow_exception(exec_outcome.backend_error);
      if (orch_outcome.backend_error)
        std::rethrow_exception(orch_outcome.backend_error);

      // Deterministic commit order regardless of completion timing.
      std::vector<BranchReport> reports;
      if (branches.executor) {
        merge_branch(exec_outcome);
        reports.push_back(
            {"executor", exec_outcome.abnormal, exec_outcome.error});
      }
      if (branches.orchestrator) {
        merge_branch(orch_outcome);
        if (!orch_outcome.audit.empty())
          emit("plan_update", "ok", join(orch_outcome.audit, "; "));
        reports.push_back(
            {"orchestrator", orch_outcome.abnormal, orch_outcome.error});
      }

      std::size_t before = history.size();
      history = agents::summarize(history, params.summarizer_threshold,
                                  params.summarizer_keep_recent);
      emit("summarizer", "ok",
           "size:" + std::to_string(before) + "->" +
               std::to_string(history.size()));

      converge(reports);
      emit("converge", "ok",
           "branches=" + std::to_string(reports.size()) +
               (branches.stall ? " stall=" + std::to_string(stall_count)
                               : ""));

      route = route_after_convergence(plan, stall_count,
                                      goal.step_budget - cycle,
                                      params.stall_threshold);
      emit("route", "ok", route.summary());
      result.cycles_used = cycle;

      if (route.kind == RouteDecision::Kind::kTerminate) break;
      if (route.kind == RouteDecision::Kind::kReplan)
        replan(plan, plan.revision + 1);
    }

    finish(route);
    result.final_plan = plan;
    return std::move(result);
  }

  RunResult run_single_agent() {
    RouteDecision route{RouteDecision::Kind::kContinue, false};
    for (cycle = 1; cycle <= goal.step_budget; ++cycle) {
      pad.set_cycle(cycle);
      DeviceState state = agents::gather_context(device, goal);
      if (state.seq < last_action_seq)
        throw std::logic_error("stale device state reached the agent");
      emit("contextor", "ok", "seq=" + std::to_string(state.seq));
      append_message(Role::kContextor,
                     "Time: " + state.timestamp + " | Package: " +
                         state.focused_package +
                         " | Seq: " + std::to_string(state.seq));

      Sink sink;
      agents::AgentContext ctx = make_context(sink, "agent");
      agents::CombinedOutput output =
          agents::decide_single(goal, state, history, &pad, ctx, flags);
      commit(sink);

      ordered_json decision;
      decision["actions"] = ordered_json::parse(
          agents::actions_to_json(output.actions));
      decision["task_complete"] = output.task_complete;
      const std::string decision_json = decision.dump();
      emit("decision", "ok",
           "actions=" + std::to_string(output.actions.size()) +
               " complete=" + (output.task_complete ? "true" : "false") +
               " seq=" + std::to_string(state.seq),
           digest_hex(decision_json), digest_hex(decision_json));
      append_message(Role::kCortex, decision_json);

      if (!output.actions.empty()) {
        stall_count = 0;
        std::vector<exec::ToolCall> calls;
        calls.reserve(output.actions.size());
        for (const auto& action : output.actions)
          calls.push_back(exec::ToolCall::from_decision(action));
        std::vector<exec::StepOutcome> steps =
            exec::execute_sequential(calls, device, &pad, flags);
        for (const auto& step : steps) {
          TraceRecord record;
          record.run_id = params.run_id;
          record.cycle_index = cycle;
          record.node = "tool:" + std::string(to_string(step.call.name));
          record.output_digest = digest_hex(step.result.detail);
          record.status = sim::to_string(step.result.status);
          record.detail = step.result.detail + " seq:" +
                          std::to_string(step.result.seq_before) + "->" +
                          std::to_string(step.result.seq_after);
          record.start_ordinal = result.trace.next_ordinal();
          record.end_ordinal = result.trace.next_ordinal();
          result.trace.append(std::move(record));
          append_message(Role::kTool, tool_message(step));
          last_action_seq = std::max(last_action_seq, step.result.seq_after);
        }
      } else if (!output.task_complete) {
        ++stall_count;
      }

      std::size_t before = history.size();
      history = agents::summarize(history, params.summarizer_threshold,
                                  params.summarizer_keep_recent);
      emit("summarizer", "ok",
           "size:" + std::to_string(before) + "->" +
               std::to_string(history.size()));

      if (output.task_complete)
        route = {RouteDecision::Kind::kTerminate, true};
      else if (goal.step_budget - cycle <= 0)
        route = {RouteDecision::Kind::kTerminate, false};
      else if (stall_count >= params.stall_threshold)
        route = {RouteDecision::Kind::kTerminate, false};
      else
        route = {RouteDecision::Kind::kContinue, false};
      emit("route", "ok", route.summary());
      result.cycles_used = cycle;
      if (route.kind == RouteDecision::Kind::kTerminate) break;
    }

    result.goal_completed = route.success;
    if (route.kind == RouteDecision::Kind::kTerminate && !route.success) {
      result.error =
          stall_count >= params.stall_threshold ? "Stalled" : "BudgetExhausted";
    }
    return std::move(result);
  }
};

}  // namespace

RunResult run_task(const TaskGoal& goal, sim::DeviceController& device,
                   llm::LlmBackend& backend,
                   const agents::PromptLibrary& prompts,
                   const AblationFlags& flags, const RunParams& params) {
  validate_goal(goal);

  Runner runner{goal, device, backend, prompts, flags, params};
  runner.result.trace = TraceLog(params.run_id);

  ordered_json header;
  header["goal_id"] = goal.id;
  header["goal"] = goal.text;
  header["step_budget"] = goal.step_budget;
  if (!goal.app_lock.empty()) header["app_lock"] = goal.app_lock;
  if (!goal.output_schema.empty()) header["output_schema"] = goal.output_schema;
  header["flags"] = flags.summary();
  header["backend"] = backend.kind();
  for (const auto& [key, value] : params.header) header[key] = value;
  runner.emit("run_start", "ok", header.dump());

  runner.history.push_back(
      {Role::kSystem, "Goal: " + goal.text, /*pinned=*/true, 0});

  RunResult result;
  try {
    result = flags.multi_agent ? runner.run_multi_agent()
                               : runner.run_single_agent();
  } catch (const llm::MissingScriptEntry& e) {
    runner.result.error = std::string("BackendError: ") + e.what();
    runner.emit("error", "error", runner.result.error);
    result = std::move(runner.result);
  } catch (const llm::TransportError& e) {
    runner.result.error = std::string("BackendError: ") + e.what();
    runner.emit("error", "error", runner.result.error);
    result = std::move(runner.result);
  } catch (const BranchPanic& e) {
    runner.result.error = e.what();
    runner.emit("error", "error", runner.result.error);
    result = std::move(runner.result);
  }

  result.final_state = device.get_state();
  result.final_history = runner.history;
  for (const auto& note : runner.pad.notes())
    result.notes.emplace_back(note.key, note.value);

  // Structured output for completed tasks that asked for one.
  if (result.goal_completed && !goal.output_schema.empty()) {
    Runner::Sink sink;
    runner.cycle = result.cycles_used;
    agents::AgentContext ctx = runner.make_context(sink, "outputter");
    try {
      result.structured_output =
          agents::outputter(result.final_state, runner.pad,
                            goal.output_schema, ctx);
    } catch (const std::exception& e) {
      result.error = std::string("OutputterError: ") + e.what();
    }
    for (auto& record : sink.records) {
      record.start_ordinal = result.trace.next_ordinal();
      record.end_ordinal = result.trace.next_ordinal();
      result.trace.append(std::move(record));
    }
    for (auto& entry : sink.prompt_log)
      result.prompts.push_back(std::move(entry));
  }

  result.ledger = CostLedger::from_trace(result.trace);
  return result;
}

}  // namespace agentloom::engine
