#include "agentloom/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "agentloom/agents.hpp"
#include "json.hpp"

namespace agentloom::harness {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Suite files
// ---------------------------------------------------------------------------

bool TaskSpec::has_tag(const std::string& tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

namespace {

TaskSpec task_from_json(const ordered_json& j) {
  TaskSpec spec;
  spec.id = j.at("id").get<std::string>();
  spec.goal = j.at("goal").get<std::string>();
  spec.preset = j.value("preset", "home_default");
  spec.step_budget = j.value("step_budget", 16);
  spec.app_lock = j.value("app_lock", "");
  if (j.contains("output_schema")) spec.output_schema = j["output_schema"].dump();
  if (j.contains("tags"))
    for (const auto& tag : j["tags"]) spec.tags.push_back(tag.get<std::string>());
  const auto& jp = j.at("predicate");
  spec.predicate.name = jp.at("name").get<std::string>();
  if (jp.contains("params")) {
    for (auto it = jp["params"].begin(); it != jp["params"].end(); ++it) {
      if (it.key() == "records") {
        for (const auto& jr : it.value()) {
          std::map<std::string, std::string> record;
          for (auto f = jr.begin(); f != jr.end(); ++f)
            record[f.key()] = f.value().get<std::string>();
          spec.predicate.records.push_back(std::move(record));
        }
      } else if (it.key() == "total") {
        spec.predicate.total = it.value().get<int>();
      } else {
        spec.predicate.params[it.key()] = it.value().get<std::string>();
      }
    }
  }
  return spec;
}

ordered_json task_to_json(const TaskSpec& spec) {
  ordered_json j;
  j["id"] = spec.id;
  j["goal"] = spec.goal;
  j["preset"] = spec.preset;
  j["step_budget"] = spec.step_budget;
  if (!spec.app_lock.empty()) j["app_lock"] = spec.app_lock;
  if (!spec.output_schema.empty())
    j["output_schema"] = ordered_json::parse(spec.output_schema);
  j["tags"] = spec.tags;
  ordered_json jp;
  jp["name"] = spec.predicate.name;
  ordered_json params;
  for (const auto& [key, value] : spec.predicate.params) params[key] = value;
  if (!spec.predicate.records.empty()) {
    params["records"] = ordered_json::array();
    for (const auto& record : spec.predicate.records) {
      ordered_json jr;
      for (const auto& [key, value] : record) jr[key] = value;
      params["records"].push_back(std::move(jr));
    }
  }
  if (spec.predicate.total) params["total"] = *spec.predicate.total;
  jp["params"] = params;
  j["predicate"] = jp;
  return j;
}

}  // namespace

std::vector<TaskSpec> load_suite(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionViolation("cannot open suite file: " + path);
  std::vector<TaskSpec> suite;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty() || starts_with(trim(line), "#")) continue;
    suite.push_back(task_from_json(ordered_json::parse(line)));
  }
  return suite;
}

std::string suite_to_lines(const std::vector<TaskSpec>& suite) {
  std::ostringstream os;
  for (const auto& spec : suite) os << task_to_json(spec).dump() << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Success predicates
// ---------------------------------------------------------------------------

namespace {

std::string param(const PredicateSpec& predicate, const std::string& key) {
  auto it = predicate.params.find(key);
  return it == predicate.params.end() ? "" : it->second;
}

bool record_matches(const sim::Record& stored,
                    const std::map<std::string, std::string>& wanted) {
  for (const auto& [field, value] : wanted) {
    auto it = stored.find(field);
    if (it == stored.end() || it->second != value) return false;
  }
  return true;
}

}  // namespace

bool check_success(
    const PredicateSpec& predicate, const sim::WorldView& world,
    const std::vector<std::pair<std::string, std::string>>& notes) {
  if (predicate.name == "field_equals") {
    const std::string app = param(predicate, "app");
    if (!app.empty() && world.foreground != app) return false;
    const UiNode* node =
        find_by_resource_id(world.state.hierarchy, param(predicate, "node"));
    if (!node || !node->text) return false;
    return *node->text == param(predicate, "expected");
  }
  if (predicate.name == "screen_is") {
    const std::string app = param(predicate, "app");
    if (world.foreground != app) return false;
    auto it = world.apps.find(app);
    return it != world.apps.end() &&
           it->second.current_screen == param(predicate, "screen");
  }
  if (predicate.name == "record_exists") {
    auto app = world.apps.find(param(predicate, "app"));
    if (app == world.apps.end()) return false;
    auto coll = app->second.collections.find(param(predicate, "collection"));
    const std::vector<sim::Record> empty;
    const std::vector<sim::Record>& stored =
        coll == app->second.collections.end() ? empty : coll->second;
    if (predicate.total &&
        static_cast<int>(stored.size()) != *predicate.total)
      return false;
    for (const auto& wanted : predicate.records) {
      bool found = false;
      for (const auto& record : stored)
        if (record_matches(record, wanted)) {
          found = true;
          break;
        }
      if (!found) return false;
    }
    return true;
  }
  if (predicate.name == "note_equals") {
    const std::string key = param(predicate, "key");
    for (const auto& [k, v] : notes)
      if (k == key) return v == param(predicate, "expected");
    return false;
  }
  throw UnknownPredicate(predicate.name);
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

BackendKind backend_kind_from_string(const std::string& name) {
  if (name == "scripted") return BackendKind::kScripted;
  if (name == "live") return BackendKind::kLive;
  if (name == "oracle") return BackendKind::kOracle;
  throw PreconditionViolation("unknown backend: " + name);
}

const char* to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kScripted: return "scripted";
    case BackendKind::kLive: return "live";
    case BackendKind::kOracle: return "oracle";
  }
  return "?";
}

int SuiteReport::successes() const {
  int n = 0;
  for (const auto& row : rows) n += row.success ? 1 : 0;
  return n;
}

std::optional<double> SuiteReport::success_rate() const {
  if (rows.empty()) return std::nullopt;
  return static_cast<double>(successes()) / static_cast<double>(rows.size());
}

std::string SuiteReport::to_text() const {
  std::ostringstream os;
  os << "suite: " << suite_name << "  seed: " << seed << "  flags: "
     << flags_summary << "  fault: " << fault_profile << "  backend: "
     << backend << "\n";
  os << "task                        ok  cycles  in_tok  out_tok  error\n";
  for (const auto& row : rows) {
    os << row.id;
    for (std::size_t i = row.id.size(); i < 28; ++i) os << ' ';
    os << (row.success ? "yes" : "NO ") << " " << row.cycles;
    for (std::size_t i = std::to_string(row.cycles).size(); i < 7; ++i)
      os << ' ';
    os << row.input_tokens;
    for (std::size_t i = std::to_string(row.input_tokens).size(); i < 7; ++i)
      os << ' ';
    os << row.output_tokens;
    for (std::size_t i = std::to_string(row.output_tokens).size(); i < 8; ++i)
      os << ' ';
    os << row.error << "\n";
  }
  if (rows.empty()) {
    os << "(zero tasks; success rate undefined)\n";
  } else {
    os << "success: " << successes() << "/" << tasks() << " (";
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f",
                  100.0 * *success_rate());
    os << buf << "%)  tokens in=" << total_input_tokens
       << " out=" << total_output_tokens << "\n";
  }
  return os.str();
}

std::string SuiteReport::to_records() const {
  std::ostringstream os;
  ordered_json header;
  header["kind"] = "suite_header";
  header["suite"] = suite_name;
  header["seed"] = seed;
  header["flags"] = flags_summary;
  header["fault"] = fault_profile;
  header["backend"] = backend;
  header["tasks"] = tasks();
  header["successes"] = successes();
  if (auto sr = success_rate()) header["sr"] = *sr;
  header["total_in"] = total_input_tokens;
  header["total_out"] = total_output_tokens;
  ordered_json models;
  for (const auto& [model, cell] : model_totals)
    models[model] = {{"in", cell.input_tokens}, {"out", cell.output_tokens}};
  header["models"] = models;
  os << header.dump() << "\n";
  for (const auto& row : rows) {
    ordered_json j;
    j["kind"] = "task";
    j["id"] = row.id;
    j["success"] = row.success;
    j["cycles"] = row.cycles;
    j["in"] = row.input_tokens;
    j["out"] = row.output_tokens;
    j["error"] = row.error;
    j["trace_hash"] = row.trace_hash;
    os << j.dump() << "\n";
  }
  return os.str();
}

SuiteReport SuiteReport::from_records(const std::string& text) {
  SuiteReport report;
  for (const auto& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    ordered_json j = ordered_json::parse(line);
    if (j.value("kind", "") == "suite_header") {
      report.suite_name = j.value("suite", "");
      report.seed = j.value("seed", std::uint64_t{0});
      report.flags_summary = j.value("flags", "");
      report.fault_profile = j.value("fault", "");
      report.backend = j.value("backend", "");
      report.total_input_tokens = j.value("total_in", std::int64_t{0});
      report.total_output_tokens = j.value("total_out", std::int64_t{0});
      if (j.contains("models")) {
        for (auto it = j["models"].begin(); it != j["models"].end(); ++it) {
          CostLedger::Cell cell;
          cell.input_tokens = it.value().value("in", std::int64_t{0});
          cell.output_tokens = it.value().value("out", std::int64_t{0});
          report.model_totals[it.key()] = cell;
        }
      }
    } else if (j.value("kind", "") == "task") {
      TaskResult row;
      row.id = j.value("id", "");
      row.success = j.value("success", false);
      row.cycles = j.value("cycles", 0);
      row.input_tokens = j.value("in", std::int64_t{0});
      row.output_tokens = j.value("out", std::int64_t{0});
      row.error = j.value("error", "");
      row.trace_hash = j.value("trace_hash", "");
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

namespace {

std::unique_ptr<llm::LlmBackend> make_backend(const SuiteRunConfig& config,
                                              const oracle::ScriptSet& scripts) {
  switch (config.backend) {
    case BackendKind::kScripted: {
      if (config.fixtures_dir.empty())
        throw PreconditionViolation(
            "scripted backend requires a fixtures directory");
      return std::make_unique<llm::ScriptedBackend>(
          llm::ScriptBook::load_dir(config.fixtures_dir), config.models);
    }
    case BackendKind::kLive:
      return std::make_unique<llm::LiveBackend>(llm::live_config_from_env());
    case BackendKind::kOracle:
      return std::make_unique<oracle::OracleBackend>(scripts, config.models);
  }
  throw PreconditionViolation("unknown backend kind");
}

const oracle::ScriptSet& shared_scripts(const SuiteRunConfig& config) {
  // Script sets are immutable once loaded; cache per assets dir.
  static std::map<std::string, oracle::ScriptSet> cache;
  static std::mutex mu;
  std::lock_guard lock(mu);
  auto it = cache.find(config.assets_dir);
  if (it == cache.end())
    it = cache.emplace(config.assets_dir,
                       oracle::ScriptSet::from_assets(config.assets_dir))
             .first;
  return it->second;
}

}  // namespace

TaskRunOutput run_task_spec(const TaskSpec& spec, const SuiteRunConfig& config,
                            llm::LlmBackend& backend) {
  TaskRunOutput output;
  output.row.id = spec.id;

  sim::FaultProfile profile = sim::fault_profile_by_name(config.fault_profile);
  std::uint64_t device_seed = mix_seed(config.seed, spec.id);
  auto device =
      sim::make_device(config.assets_dir, spec.preset, profile, device_seed);

  TaskGoal goal;
  goal.id = spec.id;
  goal.text = spec.goal;
  goal.step_budget = spec.step_budget;
  goal.app_lock = spec.app_lock;
  goal.output_schema = spec.output_schema;

  agents::PromptLibrary prompts =
      agents::PromptLibrary::from_assets(config.assets_dir);

  engine::RunParams params = config.engine_params;
  params.run_id = spec.id;
  params.header["seed"] = std::to_string(config.seed);
  params.header["device_seed"] = std::to_string(device_seed);
  params.header["fault"] = config.fault_profile;
  params.header["preset"] = spec.preset;

  output.run = engine::run_task(goal, *device, backend, prompts, config.flags,
                                params);
  output.world = device->export_world();

  output.row.cycles = output.run.cycles_used;
  output.row.error = output.run.error;
  output.row.trace_hash = output.run.trace.hash();
  output.row.input_tokens = output.run.ledger.total_input();
  output.row.output_tokens = output.run.ledger.total_output();
  if (spec.predicate.name.empty()) {
    // Raw goal with no registered predicate: the engine's own view decides.
    output.row.success = output.run.goal_completed;
  } else {
    output.row.success = output.run.goal_completed &&
                         check_success(spec.predicate, output.world,
                                       output.run.notes);
  }
  return output;
}

SuiteReport run_suite(const std::vector<TaskSpec>& suite,
                      const SuiteRunConfig& config,
                      const std::string& suite_name) {
  const oracle::ScriptSet& scripts = shared_scripts(config);
  std::unique_ptr<llm::LlmBackend> backend = make_backend(config, scripts);

  SuiteReport report;
  report.suite_name = suite_name;
  report.seed = config.seed;
  report.flags_summary = config.flags.summary();
  report.fault_profile = config.fault_profile;
  report.backend = to_string(config.backend);

  struct OneResult {
    TaskResult row;
    std::map<std::string, CostLedger::Cell> models;
  };
  auto run_one = [&](const TaskSpec& spec) -> OneResult {
    try {
      TaskRunOutput output = run_task_spec(spec, config, *backend);
      if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        output.run.trace.write_file(config.out_dir + "/trace_" + spec.id +
                                    ".jsonl");
      }
      OneResult result;
      result.row = output.row;
      for (const auto& [agent, models] : output.run.ledger.cells)
        for (const auto& [model, cell] : models) {
          result.models[model].input_tokens += cell.input_tokens;
          result.models[model].output_tokens += cell.output_tokens;
        }
      return result;
    } catch (const UnknownPredicate&) {
      throw;
    } catch (const std::exception& e) {
      // Recorded, never aborts the suite.
      OneResult result;
      result.row.id = spec.id;
      result.row.error = std::string("TaskError: ") + e.what();
      return result;
    }
  };

  std::vector<OneResult> results;
  if (config.jobs > 1) {
    std::vector<std::future<OneResult>> futures;
    futures.reserve(suite.size());
    for (const auto& spec : suite)
      futures.push_back(std::async(
          std::launch::async, [&run_one, &spec] { return run_one(spec); }));
    for (auto& future : futures) results.push_back(future.get());
  } else {
    for (const auto& spec : suite) results.push_back(run_one(spec));
  }

  for (auto& result : results) {
    report.total_input_tokens += result.row.input_tokens;
    report.total_output_tokens += result.row.output_tokens;
    for (const auto& [model, cell] : result.models) {
      report.model_totals[model].input_tokens += cell.input_tokens;
      report.model_totals[model].output_tokens += cell.output_tokens;
    }
    report.rows.push_back(std::move(result.row));
  }
  return report;
}

llm::ScriptBook generate_scriptbook(const std::vector<TaskSpec>& suite,
                                    const SuiteRunConfig& config) {
  const oracle::ScriptSet& scripts = shared_scripts(config);
  oracle::OracleBackend backend(scripts, config.models);
  for (const auto& spec : suite) run_task_spec(spec, config, backend);
  return backend.book();
}

// ---------------------------------------------------------------------------
// Ablation sweep
// ---------------------------------------------------------------------------

AblationReport ablation_sweep(const std::vector<TaskSpec>& suite,
                              const std::vector<std::string>& components,
                              const SuiteRunConfig& config) {
  AblationReport report;
  AblationRow full;
  full.component = "";
  full.report = run_suite(suite, config, "full");
  report.rows.push_back(full);
  double full_sr = full.report.success_rate().value_or(0.0);

  for (const auto& component : components) {
    SuiteRunConfig ablated = config;
    ablated.flags.disable(component);  // throws on unknown component
    AblationRow row;
    row.component = component;
    row.report = run_suite(suite, ablated, "-" + component);
    row.delta_sr =
        100.0 * (row.report.success_rate().value_or(0.0) - full_sr);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string AblationReport::to_text() const {
  std::ostringstream os;
  os << "Component Removed        SR       Delta\n";
  for (const auto& row : rows) {
    std::string name = row.component.empty() ? "None (full system)"
                                             : row.component;
    os << name;
    for (std::size_t i = name.size(); i < 25; ++i) os << ' ';
    if (auto sr = row.report.success_rate()) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%5.1f%%", 100.0 * *sr);
      os << buf;
    } else {
      os << "   n/a";
    }
    if (row.component.empty()) {
      os << "   ---\n";
    } else {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%+6.1f", row.delta_sr);
      os << "  " << buf << "\n";
    }
  }
  return os.str();
}

std::string AblationReport::to_records() const {
  std::ostringstream os;
  for (const auto& row : rows) {
    ordered_json j;
    j["kind"] = "ablation_row";
    j["component"] = row.component;
    if (auto sr = row.report.success_rate()) j["sr"] = *sr;
    j["delta_sr"] = row.delta_sr;
    j["tasks"] = row.report.tasks();
    j["successes"] = row.report.successes();
    os << j.dump() << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Pricing / Pareto
// ---------------------------------------------------------------------------

PricingTable PricingTable::parse(const std::string& json_text) {
  ordered_json j = ordered_json::parse(json_text);
  PricingTable table;
  for (auto it = j.begin(); it != j.end(); ++it) {
    Rate rate;
    rate.input_per_million = parse_usd(it.value().at("input").get<std::string>());
    rate.output_per_million =
        parse_usd(it.value().at("output").get<std::string>());
    if (rate.input_per_million < 0 || rate.output_per_million < 0)
      throw PreconditionViolation("negative rate for model " + it.key());
    // Rates must be integral nanodollars per token for exact arithmetic.
    if (rate.input_per_million % 1000000 != 0 ||
        rate.output_per_million % 1000000 != 0)
      throw PreconditionViolation("rate precision beyond 3 decimals: " +
                                  it.key());
    table.rates[it.key()] = rate;
  }
  return table;
}

PricingTable PricingTable::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionViolation("cannot open pricing file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

NanoUsd compute_cost(const std::vector<llm::TokenUsage>& usages,
                     const PricingTable& pricing) {
  NanoUsd total = 0;
  for (const auto& usage : usages) {
    auto it = pricing.rates.find(usage.model_name);
    if (it == pricing.rates.end()) throw UnpricedModel(usage.model_name);
    const NanoUsd in_per_token = it->second.input_per_million / 1000000;
    const NanoUsd out_per_token = it->second.output_per_million / 1000000;
    total += usage.input_tokens * in_per_token;
    total += usage.output_tokens * out_per_token;
  }
  return total;
}

std::vector<ConfigPoint> load_config_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionViolation("cannot open points file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  ordered_json j = ordered_json::parse(os.str());
  std::vector<ConfigPoint> points;
  for (const auto& jp : j) {
    ConfigPoint point;
    point.name = jp.at("name").get<std::string>();
    point.success_rate = jp.at("success_rate").get<double>();
    point.cost = parse_usd(jp.at("cost").get<std::string>());
    if (point.success_rate < 0.0 || point.success_rate > 1.0)
      throw PreconditionViolation("success rate out of [0,1]: " + point.name);
    if (point.cost < 0)
      throw PreconditionViolation("negative cost: " + point.name);
    points.push_back(std::move(point));
  }
  return points;
}

std::vector<ConfigPoint> pareto_frontier(
    const std::vector<ConfigPoint>& points) {
  auto dominates = [](const ConfigPoint& q, const ConfigPoint& p) {
    return q.success_rate >= p.success_rate && q.cost <= p.cost &&
           (q.success_rate > p.success_rate || q.cost < p.cost);
  };
  std::vector<ConfigPoint> frontier;
  for (const auto& candidate : points) {
    bool dominated = false;
    for (const auto& other : points)
      if (dominates(other, candidate)) {
        dominated = true;
        break;
      }
    if (!dominated) frontier.push_back(candidate);
  }
  return frontier;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

ReplayResult replay_trace(const std::string& trace_path,
                          const SuiteRunConfig& config) {
  TraceLog original = TraceLog::read_file(trace_path);
  if (original.records().empty() ||
      original.records().front().node != "run_start")
    return {false, 0, "trace has no run_start header"};

  ordered_json header =
      ordered_json::parse(original.records().front().detail);

  TaskSpec spec;
  spec.id = header.value("goal_id", "task");
  spec.goal = header.value("goal", "");
  spec.preset = header.value("preset", "home_default");
  spec.step_budget = header.value("step_budget", 16);
  spec.app_lock = header.value("app_lock", "");
  if (header.contains("output_schema"))
    spec.output_schema = header["output_schema"].get<std::string>();
  spec.predicate.name = "screen_is";  // replay compares traces, not success
  spec.predicate.params["app"] = "home";
  spec.predicate.params["screen"] = "main";

  SuiteRunConfig replay_config = config;
  replay_config.fault_profile = header.value("fault", "none");
  replay_config.seed = std::stoull(header.value("seed", "1"));
  replay_config.backend =
      backend_kind_from_string(header.value("backend", "scripted"));
  replay_config.flags = AblationFlags{};
  std::string flags_summary = header.value("flags", "full");
  if (flags_summary != "full") {
    for (const auto& part : split_lines(replace_all(flags_summary, ",", "\n")))
      if (starts_with(part, "-")) replay_config.flags.disable(part.substr(1));
  }

  const oracle::ScriptSet& scripts = shared_scripts(replay_config);
  std::unique_ptr<llm::LlmBackend> backend =
      make_backend(replay_config, scripts);
  TaskRunOutput output = run_task_spec(spec, replay_config, *backend);

  std::vector<std::string> want = original.to_lines();
  std::vector<std::string> got = output.run.trace.to_lines();
  std::size_t n = std::min(want.size(), got.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (want[i] != got[i])
      return {false, static_cast<int>(i + 1),
              "record " + std::to_string(i + 1) + " differs"};
  }
  if (want.size() != got.size())
    return {false, static_cast<int>(n + 1),
            "record count differs: trace has " + std::to_string(want.size()) +
                ", replay produced " + std::to_string(got.size())};
  return {true, -1,
          "MATCH (" + std::to_string(want.size()) + " records, hash " +
              output.run.trace.hash() + ")"};
}

}  // namespace agentloom::harness
