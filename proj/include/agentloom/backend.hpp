#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "agentloom/domain.hpp"

namespace agentloom::llm {

struct CompletionRequest {
  Role agent_role = Role::kSystem;
  std::string prompt;         // nonempty
  std::string output_schema;  // structured-output description, may be empty
  double temperature = 0.0;
};

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::string model_name;
};

struct Completion {
  std::string text;
  TokenUsage usage;
};

// Role -> model name mapping, for cost attribution.
struct ModelAssignment {
  std::map<std::string, std::string> by_role;
  std::string fallback = "sim-oracle";

  const std::string& model_for(Role role) const {
    auto it = by_role.find(to_string(role));
    return it == by_role.end() ? fallback : it->second;
  }
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  // Throws on transport/script errors; schema validation is the caller's
  // concern.
  virtual Completion complete(const CompletionRequest& request) = 0;
  virtual std::string kind() const = 0;
};

// Scripted-backend token rule: ceil(chars / 4) per side.
std::int64_t estimate_tokens(std::string_view text);

// Whitespace runs collapse to single spaces and "Time:" lines are stripped,
// so replay fingerprints are insensitive to the wall clock.
std::string normalize_prompt(std::string_view prompt);
std::string request_fingerprint(Role role, std::string_view prompt);

struct MissingScriptEntry : std::runtime_error {
  MissingScriptEntry(const std::string& role, const std::string& fingerprint)
      : std::runtime_error("missing script entry: role=" + role +
                           " fingerprint=" + fingerprint),
        fingerprint(fingerprint) {}
  std::string fingerprint;
};

// Canned responses keyed by (agent role, prompt fingerprint). Lookups are
// total for a fixture suite: a missing entry is an error, not a fallback.
class ScriptBook {
 public:
  void add(Role role, const std::string& fingerprint, std::string response);
  std::optional<std::string> find(Role role,
                                  const std::string& fingerprint) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // One file per entry: <role>__<fingerprint>.txt with the raw response.
  void save_dir(const std::string& dir) const;
  static ScriptBook load_dir(const std::string& dir);

 private:
  std::map<std::pair<std::string, std::string>, std::string> entries_;
};

class ScriptedBackend : public LlmBackend {
 public:
  ScriptedBackend(ScriptBook book, ModelAssignment models)
      : book_(std::move(book)), models_(std::move(models)) {}

  Completion complete(const CompletionRequest& request) override;
  std::string kind() const override { return "scripted"; }

 private:
  ScriptBook book_;
  ModelAssignment models_;
};

// ---------------------------------------------------------------------------
// Live HTTP chat-completion client
// ---------------------------------------------------------------------------

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LiveConfig {
  std::string base_url;  // e.g. http://host:port (path /v1/chat/completions)
  std::string api_key;
  std::string path = "/v1/chat/completions";
  ModelAssignment models;
  int max_attempts = 3;
  int backoff_initial_ms = 200;
  int max_in_flight = 4;
  int timeout_seconds = 60;
};

// Reads AGENTLOOM_LLM_URL / AGENTLOOM_LLM_KEY. Throws when the URL is unset.
LiveConfig live_config_from_env();

class LiveBackend : public LlmBackend {
 public:
  explicit LiveBackend(LiveConfig config);
  ~LiveBackend() override;

  Completion complete(const CompletionRequest& request) override;
  std::string kind() const override { return "live"; }

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace agentloom::llm
