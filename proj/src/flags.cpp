#include "agentloom/flags.hpp"

#include "agentloom/util.hpp"

namespace agentloom {

namespace {

bool* field_for(AblationFlags& f, std::string_view name) {
  if (name == "multi_agent") return &f.multi_agent;
  if (name == "post_validation") return &f.post_validation;
  if (name == "sequential_exec") return &f.sequential_exec;
  if (name == "hybrid_perception") return &f.hybrid_perception;
  if (name == "metacog") return &f.metacog;
  if (name == "scratchpad") return &f.scratchpad;
  if (name == "data_fidelity_prompt") return &f.data_fidelity_prompt;
  if (name == "video") return &f.video;
  return nullptr;
}

}  // namespace

const std::vector<std::string>& AblationFlags::component_names() {
  static const std::vector<std::string> kNames = {
      "multi_agent",       "post_validation", "sequential_exec",
      "hybrid_perception", "metacog",         "scratchpad",
      "data_fidelity_prompt", "video"};
  return kNames;
}

void AblationFlags::disable(std::string_view component) {
  bool* field = field_for(*this, component);
  if (!field)
    throw PreconditionViolation("unknown ablation component: " +
                                std::string(component));
  *field = false;
}

bool AblationFlags::enabled(std::string_view component) const {
  auto copy = *this;
  bool* field = field_for(copy, component);
  if (!field)
    throw PreconditionViolation("unknown ablation component: " +
                                std::string(component));
  return *field;
}

std::string AblationFlags::summary() const {
  std::string out;
  auto copy = *this;
  for (const auto& name : component_names()) {
    if (!*field_for(copy, name)) {
      if (!out.empty()) out += ",";
      out += "-" + name;
    }
  }
  return out.empty() ? "full" : out;
}

}  // namespace agentloom
