#include "agentloom/backend.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "agentloom/util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace agentloom::llm {

using nlohmann::ordered_json;

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

std::string normalize_prompt(std::string_view prompt) {
  std::vector<std::string> kept;
  for (const auto& line : split_lines(prompt)) {
    if (starts_with(trim(line), "Time:")) continue;
    kept.push_back(line);
  }
  return normalize_whitespace(join(kept, "\n"));
}

std::string request_fingerprint(Role role, std::string_view prompt) {
  std::uint64_t h = fnv1a64(to_string(role));
  h = fnv1a64("\x1f", h);
  h = fnv1a64(normalize_prompt(prompt), h);
  return hex16(h);
}

void ScriptBook::add(Role role, const std::string& fingerprint,
                     std::string response) {
  auto key = std::make_pair(std::string(to_string(role)), fingerprint);
  auto it = entries_.find(key);
  if (it != entries_.end()) {
    if (it->second != response)
      throw std::runtime_error(
          "conflicting script entry for fingerprint " + fingerprint +
          " (nondeterministic responder?)");
    return;
  }
  entries_.emplace(std::move(key), std::move(response));
}

std::optional<std::string> ScriptBook::find(
    Role role, const std::string& fingerprint) const {
  auto it = entries_.find({std::string(to_string(role)), fingerprint});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ScriptBook::save_dir(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& [key, response] : entries_) {
    std::ofstream out(dir + "/" + key.first + "__" + key.second + ".txt",
                      std::ios::binary);
    out << response;
  }
}

ScriptBook ScriptBook::load_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  ScriptBook book;
  if (!fs::is_directory(dir))
    throw PreconditionViolation("scriptbook directory not found: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".txt")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  for (const auto& path : paths) {
    std::string stem = fs::path(path).stem().string();
    std::size_t sep = stem.find("__");
    if (sep == std::string::npos) continue;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    book.add(role_from_string(stem.substr(0, sep)), stem.substr(sep + 2),
             os.str());
  }
  return book;
}

Completion ScriptedBackend::complete(const CompletionRequest& request) {
  if (request.prompt.empty())
    throw PreconditionViolation("completion prompt must be nonempty");
  std::string fingerprint =
      request_fingerprint(request.agent_role, request.prompt);
  auto canned = book_.find(request.agent_role, fingerprint);
  if (!canned)
    throw MissingScriptEntry(to_string(request.agent_role), fingerprint);
  Completion completion;
  completion.text = *canned;
  completion.usage.input_tokens = estimate_tokens(request.prompt);
  completion.usage.output_tokens = estimate_tokens(completion.text);
  completion.usage.model_name = models_.model_for(request.agent_role);
  return completion;
}

// ---------------------------------------------------------------------------
// Live backend
// ---------------------------------------------------------------------------

LiveConfig live_config_from_env() {
  const char* url = std::getenv("AGENTLOOM_LLM_URL");
  if (!url || !*url)
    throw PreconditionViolation(
        "AGENTLOOM_LLM_URL is not set; live backend unavailable");
  LiveConfig config;
  config.base_url = url;
  if (const char* key = std::getenv("AGENTLOOM_LLM_KEY")) config.api_key = key;
  return config;
}

class LiveBackend::Impl {
 public:
  explicit Impl(LiveConfig config) : config_(std::move(config)) {}

  Completion complete(const CompletionRequest& request) {
    InFlightGuard guard(*this);
    const std::string model = config_.models.model_for(request.agent_role);

    ordered_json body;
    body["model"] = model;
    body["temperature"] = request.temperature;
    body["messages"] = ordered_json::array();
    body["messages"].push_back(
        {{"role", "user"}, {"content", request.prompt}});
    if (!request.output_schema.empty()) {
      ordered_json schema = ordered_json::parse(request.output_schema,
                                                nullptr, false);
      if (schema.is_discarded()) schema = request.output_schema;
      body["response_format"] = {
          {"type", "json_schema"},
          {"json_schema", {{"name", "agent_output"}, {"schema", schema}}}};
    }

    int backoff = config_.backoff_initial_ms;
    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
      httplib::Client client(config_.base_url);
      client.set_read_timeout(config_.timeout_seconds, 0);
      httplib::Headers headers;
      if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = client.Post(config_.path, headers, body.dump(),
                             "application/json");
      if (res && res->status == 200) {
        return parse_response(res->body, model, request);
      }
      if (res && res->status == 429) {
        last_error = "rate limited";
      } else if (res) {
        last_error = "http status " + std::to_string(res->status);
        if (res->status >= 400 && res->status < 500 && res->status != 429)
          throw TransportError("chat completion failed: " + last_error +
                               " body=" + res->body);
      } else {
        last_error = "connection error";
      }
      if (attempt < config_.max_attempts) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
    }
    throw TransportError("chat completion failed after " +
                         std::to_string(config_.max_attempts) +
                         " attempts: " + last_error);
  }

 private:
  Completion parse_response(const std::string& body, const std::string& model,
                            const CompletionRequest& request) {
    ordered_json j = ordered_json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
      throw TransportError("malformed chat completion response");
    Completion completion;
    completion.text =
        j["choices"][0]["message"]["content"].get<std::string>();
    if (j.contains("usage")) {
      completion.usage.input_tokens =
          j["usage"].value("prompt_tokens", std::int64_t{0});
      completion.usage.output_tokens =
          j["usage"].value("completion_tokens", std::int64_t{0});
    } else {
      completion.usage.input_tokens = estimate_tokens(request.prompt);
      completion.usage.output_tokens = estimate_tokens(completion.text);
    }
    completion.usage.model_name = model;
    return completion;
  }

  // Counting semaphore for the max-in-flight limit.
  struct InFlightGuard {
    explicit InFlightGuard(Impl& impl) : impl(impl) {
      std::unique_lock lock(impl.mu_);
      impl.cv_.wait(lock,
                    [&] { return impl.in_flight_ < impl.config_.max_in_flight; });
      ++impl.in_flight_;
    }
    ~InFlightGuard() {
      {
        std::lock_guard lock(impl.mu_);
        --impl.in_flight_;
      }
      impl.cv_.notify_one();
    }
    Impl& impl;
  };

  LiveConfig config_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

LiveBackend::LiveBackend(LiveConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

LiveBackend::~LiveBackend() = default;

Completion LiveBackend::complete(const CompletionRequest& request) {
  if (request.prompt.empty())
    throw PreconditionViolation("completion prompt must be nonempty");
  return impl_->complete(request);
}

}  // namespace agentloom::llm
