#pragma once

#include <optional>
#include <string>

#include "agentloom/domain.hpp"

namespace agentloom::exec {

// A parsed, executor-validated tool invocation. Mirrors ActionDecision;
// carries targeting information and the reasoning annotation through to
// results and traces.
struct ToolCall {
  ActionKind name = ActionKind::kUnknown;
  std::string raw_name;
  std::optional<SelectorBundle> selector;
  std::optional<std::string> payload;
  std::string reasoning;

  static ToolCall from_decision(const ActionDecision& d) {
    return ToolCall{d.kind, d.raw_kind, d.target, d.payload, d.reasoning};
  }
};

}  // namespace agentloom::exec
