#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace agentloom {

// Runtime toggles, one per removable architectural component. All on by
// default; ablation sweeps turn them off one at a time.
struct AblationFlags {
  bool multi_agent = true;
  bool post_validation = true;
  bool sequential_exec = true;
  bool hybrid_perception = true;
  bool metacog = true;
  bool scratchpad = true;
  bool data_fidelity_prompt = true;
  bool video = true;

  static const std::vector<std::string>& component_names();

  // Throws PreconditionViolation on an unknown component name.
  void disable(std::string_view component);
  bool enabled(std::string_view component) const;

  std::string summary() const;  // e.g. "-post_validation" or "full"
};

}  // namespace agentloom
