#include "agentloom/verified_exec.hpp"

#include <sstream>

namespace agentloom::exec {

namespace {

std::string node_text(const sim::Resolved& hit) {
  return hit.node->text ? *hit.node->text : "";
}

// Step 1-3 of the procedure for one attempt. A focus steal surfaces as
// NoFocusedField from type_text; it is retried once within the attempt.
sim::ActionResult focus_cursor_type(const SelectorBundle& target,
                                    const std::string& text,
                                    sim::DeviceController& device) {
  device.focus(target);
  device.set_cursor_end(target);
  sim::ActionResult typed = device.type_text(text);
  if (!typed.ok() && typed.detail == "NoFocusedField") {
    device.focus(target);
    device.set_cursor_end(target);
    typed = device.type_text(text);
  }
  return typed;
}

std::string query_field(const SelectorBundle& target,
                        sim::DeviceController& device) {
  DeviceState fresh = device.get_state();
  auto hit = sim::resolve_selector(target, fresh.hierarchy);
  if (!hit) throw ElementNotFound(target.canonical());
  return node_text(*hit);
}

}  // namespace

VerificationFeedback input_text_verified(const SelectorBundle& bundle,
                                         const std::string& text,
                                         sim::DeviceController& device,
                                         const AblationFlags& flags) {
  if (text.empty())
    throw PreconditionViolation("input text must be nonempty");

  DeviceState state = device.get_state();
  auto hit = sim::resolve_selector(bundle, state.hierarchy);
  if (!hit) throw ElementNotFound(bundle.canonical());
  if (!hit->node->editable) throw FieldNotEditable(hit->node->node_id);

  VerificationFeedback feedback;
  feedback.expected = text;
  feedback.tier_used = hit->tier;

  // Re-target through the resolved node's resource id so later re-queries
  // hit the same element even if the original selector was coordinates.
  SelectorBundle target = hit->node->resource_id
                              ? SelectorBundle::by_resource_id(
                                    *hit->node->resource_id)
                              : bundle;

  for (int attempt = 1; attempt <= kInputRetryBudget; ++attempt) {
    feedback.attempts = attempt;
    const std::string before = query_field(target, device);

    focus_cursor_type(target, text, device);

    if (!flags.post_validation) {
      // Baseline behavior: steps 4-6 skipped, success assumed.
      feedback.verified = true;
      feedback.actual = text;
      return feedback;
    }

    std::string actual = query_field(target, device);
    if (ends_with(actual, text)) {
      feedback.verified = true;
      feedback.actual = actual;
      return feedback;
    }

    // Clear only the characters this attempt appended.
    if (actual.size() > before.size()) {
      std::size_t appended = actual.size() - before.size();
      device.focus(target);
      device.set_cursor_end(target);
      sim::ActionResult cleared =
          device.type_text(std::string(appended, '\b'));
      if (!cleared.ok() && cleared.detail == "NoFocusedField") {
        device.focus(target);
        device.set_cursor_end(target);
        device.type_text(std::string(appended, '\b'));
      }
    }
  }

  feedback.verified = false;
  feedback.actual = query_field(target, device);
  return feedback;
}

namespace {

std::string expand_note_refs(std::string payload, const Scratchpad* pad,
                             const AblationFlags& flags) {
  if (!flags.scratchpad || pad == nullptr) return payload;
  std::size_t pos;
  while ((pos = payload.find("{note:")) != std::string::npos) {
    std::size_t end = payload.find('}', pos);
    if (end == std::string::npos) break;
    std::string key = payload.substr(pos + 6, end - pos - 6);
    auto value = pad->read_note(key);
    if (!value) break;  // unresolved reference stays literal
    payload.replace(pos, end - pos + 1, *value);
  }
  return payload;
}

std::uint64_t current_seq(sim::DeviceController& device) {
  return device.get_state().seq;
}

StepOutcome run_one(const ToolCall& call, sim::DeviceController& device,
                    Scratchpad* pad, const AblationFlags& flags) {
  StepOutcome step;
  step.call = call;
  switch (call.name) {
    case ActionKind::kSaveNote: {
      std::uint64_t seq = current_seq(device);
      if (!flags.scratchpad || pad == nullptr) {
        step.result = {sim::ActionResult::Status::kOk, "scratchpad disabled",
                       seq, seq};
        break;
      }
      std::string payload = call.payload.value_or("");
      std::size_t eq = payload.find('=');
      if (eq == std::string::npos || eq == 0) {
        step.result =
            sim::ActionResult::failure("save_note payload must be key=value",
                                       seq);
        break;
      }
      pad->save_note(payload.substr(0, eq), payload.substr(eq + 1));
      step.result = {sim::ActionResult::Status::kOk,
                     "saved:" + payload.substr(0, eq), seq, seq};
      break;
    }
    case ActionKind::kReadNote: {
      std::uint64_t seq = current_seq(device);
      std::string key = call.payload.value_or("");
      std::optional<std::string> value;
      if (flags.scratchpad && pad != nullptr) value = pad->read_note(key);
      step.tool_output = value.value_or("");
      step.result = {sim::ActionResult::Status::kOk,
                     value ? "note:" + key : "note absent: " + key, seq, seq};
      break;
    }
    case ActionKind::kListNotes: {
      std::uint64_t seq = current_seq(device);
      std::vector<std::string> keys;
      if (flags.scratchpad && pad != nullptr) keys = pad->list_notes();
      step.tool_output = join(keys, ",");
      step.result = {sim::ActionResult::Status::kOk,
                     "notes:" + std::to_string(keys.size()), seq, seq};
      break;
    }
    case ActionKind::kTypeText: {
      std::uint64_t seq = current_seq(device);
      if (!call.selector) {
        step.result =
            sim::ActionResult::failure("type_text requires a selector", seq);
        break;
      }
      std::string payload =
          expand_note_refs(call.payload.value_or(""), pad, flags);
      try {
        VerificationFeedback feedback =
            input_text_verified(*call.selector, payload, device, flags);
        step.feedback = feedback;
        std::ostringstream os;
        os << "verified=" << (feedback.verified ? "true" : "false")
           << " attempts=" << feedback.attempts << " actual="
           << feedback.actual;
        step.result = {feedback.verified ? sim::ActionResult::Status::kOk
                                         : sim::ActionResult::Status::kFailed,
                       os.str(), seq, current_seq(device)};
      } catch (const std::exception& e) {
        step.result = sim::ActionResult::failure(e.what(), seq);
      }
      break;
    }
    case ActionKind::kStartRecording: {
      std::uint64_t seq = current_seq(device);
      if (!flags.video) {
        step.result = {sim::ActionResult::Status::kOk, "video disabled", seq,
                       seq};
        break;
      }
      step.result = device.start_recording();
      break;
    }
    case ActionKind::kStopRecording: {
      std::uint64_t seq = current_seq(device);
      if (!flags.video) {
        step.result = {sim::ActionResult::Status::kOk,
                       "video disabled; no frames", seq, seq};
        break;
      }
      sim::FrameLog log;
      step.result = device.stop_recording(log);
      step.result.detail = sim::describe_frames(log);
      break;
    }
    default:
      step.result = sim::apply_action(device, call);
      break;
  }
  return step;
}

}  // namespace

std::vector<StepOutcome> execute_sequential(const std::vector<ToolCall>& calls,
                                            sim::DeviceController& device,
                                            Scratchpad* pad,
                                            const AblationFlags& flags) {
  std::vector<StepOutcome> outcomes;
  outcomes.reserve(calls.size());
  bool aborted = false;
  for (const ToolCall& call : calls) {
    if (aborted) {
      StepOutcome step;
      step.call = call;
      std::uint64_t seq = current_seq(device);
      step.result = {sim::ActionResult::Status::kAborted,
                     "aborted after earlier failure", seq, seq};
      outcomes.push_back(std::move(step));
      continue;
    }
    StepOutcome step = run_one(call, device, pad, flags);
    if (!step.result.ok() && flags.sequential_exec) aborted = true;
    outcomes.push_back(std::move(step));
  }
  return outcomes;
}

}  // namespace agentloom::exec
