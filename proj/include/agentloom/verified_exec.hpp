#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentloom/flags.hpp"
#include "agentloom/scratchpad.hpp"
#include "agentloom/sim_device.hpp"
#include "agentloom/toolcall.hpp"

namespace agentloom::exec {

struct ElementNotFound : std::runtime_error {
  explicit ElementNotFound(const std::string& selector)
      : std::runtime_error("ElementNotFound: " + selector) {}
};

struct FieldNotEditable : std::runtime_error {
  explicit FieldNotEditable(const std::string& what)
      : std::runtime_error("FieldNotEditable: " + what) {}
};

// Outcome of the six-step verified text-input procedure. `actual` is the
// complete field content at feedback time.
struct VerificationFeedback {
  bool verified = false;
  std::string expected;
  std::string actual;
  std::optional<sim::SelectorTier> tier_used;
  int attempts = 0;
};

inline constexpr int kInputRetryBudget = 3;

// Six-step deterministic text input:
//   1. focus with selector-tier fallback
//   2. cursor to end of existing content
//   3. type
//   4. fetch fresh device state
//   5. locate the target and extract its full content
//   6. return the explicit comparison
// Verification predicate: actual ends with expected (cursor-at-end appends
// to pre-existing content). On mismatch the characters appended by the
// attempt are cleared and the attempt repeats, up to kInputRetryBudget.
// With flags.post_validation=false, steps 4-6 are skipped and the feedback
// unconditionally claims success (the silent-failure baseline).
// Throws ElementNotFound / FieldNotEditable / PreconditionViolation.
VerificationFeedback input_text_verified(const SelectorBundle& bundle,
                                         const std::string& text,
                                         sim::DeviceController& device,
                                         const AblationFlags& flags);

// Result of one tool call inside a sequential batch.
struct StepOutcome {
  ToolCall call;
  sim::ActionResult result;
  std::optional<VerificationFeedback> feedback;  // TypeText only
  std::string tool_output;                       // ReadNote / ListNotes value
};

// Executes calls in order. With flags.sequential_exec, the first non-ok
// result aborts the remainder: those calls are marked Aborted and never
// touch the device. With the flag off every call executes regardless.
// SaveNote/ReadNote/ListNotes address the scratchpad (no-ops when
// flags.scratchpad is off); TypeText goes through input_text_verified;
// StopRecording attaches the frame-log summary; everything else dispatches
// to apply_action. Failures are results, not exceptions.
std::vector<StepOutcome> execute_sequential(const std::vector<ToolCall>& calls,
                                            sim::DeviceController& device,
                                            Scratchpad* pad,
                                            const AblationFlags& flags);

}  // namespace agentloom::exec
