// agentloom: run simulated mobile-automation tasks, benchmark suites, sweep
// ablations, replay traces, and analyze cost/Pareto tradeoffs.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "agentloom/harness.hpp"
#include "agentloom/oracle.hpp"

using namespace agentloom;

namespace {

#ifndef AGENTLOOM_DEFAULT_ASSETS
#define AGENTLOOM_DEFAULT_ASSETS "fixtures"
#endif

constexpr int kExitSuccess = 0;
constexpr int kExitTaskFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonOptions {
  std::string assets = AGENTLOOM_DEFAULT_ASSETS;
  std::string backend = "scripted";
  std::string fixtures;
  std::string fault = "none";
  std::uint64_t seed = 1;
  std::vector<std::string> disable;
  std::string out;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--assets", options.assets,
                  "Assets directory (apps, prompts, scripts, suites)");
  cmd->add_option("--backend", options.backend,
                  "Completion backend: scripted|live|oracle");
  cmd->add_option("--fixtures", options.fixtures,
                  "ScriptBook directory (required for --backend scripted)");
  cmd->add_option("--fault", options.fault,
                  "Fault profile: none|keyboard|focus|slow|flaky");
  cmd->add_option("--seed", options.seed, "Deterministic run seed");
  cmd->add_option("--disable", options.disable,
                  "Disable an ablation component (repeatable)")
      ->take_all();
  cmd->add_option("--out", options.out, "Output directory for traces/reports");
  cmd->add_option("--jobs", options.jobs, "Concurrent task runs");
}

harness::SuiteRunConfig make_config(const CommonOptions& options) {
  harness::SuiteRunConfig config;
  config.assets_dir = options.assets;
  config.backend = harness::backend_kind_from_string(options.backend);
  config.fixtures_dir = options.fixtures;
  config.fault_profile = options.fault;
  config.seed = options.seed;
  config.jobs = options.jobs;
  config.out_dir = options.out;
  for (const auto& component : options.disable)
    config.flags.disable(component);
  return config;
}

std::vector<harness::TaskSpec> load_suite_or_default(
    const CommonOptions& options, const std::string& suite_path) {
  std::string path = suite_path.empty()
                         ? options.assets + "/suites/mini20.jsonl"
                         : suite_path;
  return harness::load_suite(path);
}

void write_or_print(const std::string& out_dir, const std::string& filename,
                    const std::string& records, const std::string& text) {
  std::cout << text;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream file(out_dir + "/" + filename, std::ios::binary);
    file << records;
    std::cout << "wrote " << out_dir << "/" << filename << "\n";
  }
}

int cmd_run(const CommonOptions& options, const std::string& task_id,
            const std::string& goal_text, const std::string& suite_path,
            int budget) {
  harness::SuiteRunConfig config = make_config(options);
  harness::TaskSpec spec;
  if (!task_id.empty()) {
    auto suite = load_suite_or_default(options, suite_path);
    auto it = std::find_if(suite.begin(), suite.end(),
                           [&](const auto& s) { return s.id == task_id; });
    if (it == suite.end()) {
      std::cerr << "error: task not found in suite: " << task_id << "\n";
      return kExitConfigError;
    }
    spec = *it;
  } else {
    spec.id = "goal";
    spec.goal = goal_text;
    spec.step_budget = budget > 0 ? budget : 24;
  }
  if (budget > 0) spec.step_budget = budget;

  const oracle::ScriptSet scripts =
      oracle::ScriptSet::from_assets(config.assets_dir);
  std::unique_ptr<llm::LlmBackend> backend;
  switch (config.backend) {
    case harness::BackendKind::kScripted:
      if (config.fixtures_dir.empty()) {
        std::cerr << "error: --backend scripted requires --fixtures\n";
        return kExitConfigError;
      }
      backend = std::make_unique<llm::ScriptedBackend>(
          llm::ScriptBook::load_dir(config.fixtures_dir), config.models);
      break;
    case harness::BackendKind::kLive:
      backend = std::make_unique<llm::LiveBackend>(llm::live_config_from_env());
      break;
    case harness::BackendKind::kOracle:
      backend = std::make_unique<oracle::OracleBackend>(scripts, config.models);
      break;
  }

  harness::TaskRunOutput output =
      harness::run_task_spec(spec, config, *backend);
  std::cout << "task: " << spec.id << "\n"
            << "success: " << (output.row.success ? "true" : "false") << "\n"
            << "cycles: " << output.row.cycles << "\n"
            << "tokens: in=" << output.row.input_tokens
            << " out=" << output.row.output_tokens << "\n";
  if (!output.row.error.empty())
    std::cout << "error: " << output.row.error << "\n";
  if (!output.run.structured_output.empty())
    std::cout << "output: " << output.run.structured_output << "\n";
  std::cout << "trace_hash: " << output.row.trace_hash << "\n";
  if (!options.out.empty()) {
    std::filesystem::create_directories(options.out);
    std::string path = options.out + "/trace_" + spec.id + ".jsonl";
    output.run.trace.write_file(path);
    std::cout << "wrote " << path << "\n";
  }
  return output.row.success ? kExitSuccess : kExitTaskFailure;
}

int cmd_bench(const CommonOptions& options, const std::string& suite_path) {
  harness::SuiteRunConfig config = make_config(options);
  auto suite = load_suite_or_default(options, suite_path);
  harness::SuiteReport report = harness::run_suite(suite, config, "bench");
  write_or_print(options.out, "suite_report.jsonl", report.to_records(),
                 report.to_text());
  return report.successes() == report.tasks() ? kExitSuccess
                                              : kExitTaskFailure;
}

int cmd_ablate(const CommonOptions& options, const std::string& suite_path,
               std::vector<std::string> components) {
  harness::SuiteRunConfig config = make_config(options);
  auto suite = load_suite_or_default(options, suite_path);
  if (components.size() == 1 && components[0] == "all")
    components = AblationFlags::component_names();
  harness::AblationReport report =
      harness::ablation_sweep(suite, components, config);
  write_or_print(options.out, "ablation_report.jsonl", report.to_records(),
                 report.to_text());
  return kExitSuccess;
}

int cmd_replay(const CommonOptions& options, const std::string& trace_path) {
  harness::SuiteRunConfig config = make_config(options);
  harness::ReplayResult result = harness::replay_trace(trace_path, config);
  if (result.match) {
    std::cout << result.message << "\n";
    return kExitSuccess;
  }
  std::cout << "MISMATCH at record " << result.first_mismatch << " ("
            << result.message << ")\n";
  return kExitTaskFailure;
}

int cmd_analyze(const CommonOptions& options, const std::string& report_path,
                const std::string& pricing_path,
                const std::string& points_path) {
  (void)options;
  if (!report_path.empty()) {
    std::ifstream in(report_path);
    if (!in) {
      std::cerr << "error: cannot open report: " << report_path << "\n";
      return kExitConfigError;
    }
    std::ostringstream os;
    os << in.rdbuf();
    harness::SuiteReport report = harness::SuiteReport::from_records(os.str());
    harness::PricingTable pricing =
        harness::PricingTable::load_file(pricing_path);

    std::vector<llm::TokenUsage> usages;
    std::cout << "model                  in_tokens  out_tokens  cost_usd\n";
    for (const auto& [model, cell] : report.model_totals) {
      llm::TokenUsage usage{cell.input_tokens, cell.output_tokens, model};
      NanoUsd cost = harness::compute_cost({usage}, pricing);
      std::cout << model;
      for (std::size_t i = model.size(); i < 23; ++i) std::cout << ' ';
      std::cout << cell.input_tokens << "  " << cell.output_tokens << "  $"
                << format_usd(cost) << "\n";
      usages.push_back(usage);
    }
    NanoUsd total = harness::compute_cost(usages, pricing);
    std::cout << "total cost: $" << format_usd(total);
    if (report.tasks() > 0) {
      std::cout << "  (" << report.tasks() << " tasks, $"
                << format_usd(total / report.tasks()) << "/task)";
    }
    std::cout << "\n";
    if (auto sr = report.success_rate()) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * *sr);
      std::cout << "success rate: " << buf << "%\n";
    }
  }

  if (!points_path.empty()) {
    auto points = harness::load_config_points(points_path);
    auto frontier = harness::pareto_frontier(points);
    auto on_frontier = [&](const std::string& name) {
      for (const auto& point : frontier)
        if (point.name == name) return true;
      return false;
    };
    std::cout << "configuration            SR      cost/task  pareto\n";
    for (const auto& point : points) {
      std::cout << point.name;
      for (std::size_t i = point.name.size(); i < 24; ++i) std::cout << ' ';
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%5.1f%%", 100.0 * point.success_rate);
      std::cout << buf << "  $" << format_usd(point.cost);
      std::cout << (on_frontier(point.name) ? "      *" : "") << "\n";
    }
    std::cout << "pareto frontier:";
    for (const auto& point : frontier) std::cout << " [" << point.name << "]";
    std::cout << "\n";
  }
  return kExitSuccess;
}

int cmd_scriptgen(const CommonOptions& options, const std::string& suite_path,
                  const std::string& out_dir) {
  CommonOptions generation = options;
  generation.backend = "oracle";
  harness::SuiteRunConfig config = make_config(generation);
  auto suite = load_suite_or_default(options, suite_path);
  llm::ScriptBook book = harness::generate_scriptbook(suite, config);
  book.save_dir(out_dir);
  std::cout << "recorded " << book.size() << " script entries to " << out_dir
            << "\n";
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agentloom: simulated multi-agent mobile automation"};
  app.require_subcommand(1);

  CommonOptions options;
  std::string task_id, goal_text, suite_path, trace_path;
  std::string report_path, pricing_path, points_path, scriptgen_out;
  std::vector<std::string> components;
  int budget = 0;

  CLI::App* run = app.add_subcommand("run", "Run a single task");
  add_common(run, options);
  run->add_option("--task", task_id, "Task id from the suite file");
  run->add_option("--goal", goal_text, "Raw natural-language goal");
  run->add_option("--suite", suite_path, "Suite file (JSONL)");
  run->add_option("--budget", budget, "Override the step budget");

  CLI::App* bench = app.add_subcommand("bench", "Run a task suite");
  add_common(bench, options);
  bench->add_option("--suite", suite_path, "Suite file (JSONL)");

  CLI::App* ablate =
      app.add_subcommand("ablate", "Sweep single-component ablations");
  add_common(ablate, options);
  ablate->add_option("--suite", suite_path, "Suite file (JSONL)");
  ablate
      ->add_option("--components", components,
                   "Components to remove one at a time, or 'all'")
      ->delimiter(',');

  CLI::App* replay =
      app.add_subcommand("replay", "Re-execute a trace and verify it");
  add_common(replay, options);
  replay->add_option("--trace", trace_path, "Trace file (JSONL)")->required();

  CLI::App* analyze =
      app.add_subcommand("analyze", "Cost breakdown and Pareto frontier");
  analyze->add_option("--report", report_path, "Suite report records file");
  analyze->add_option("--pricing", pricing_path, "Pricing table JSON");
  analyze->add_option("--points", points_path, "Config points JSON");

  CLI::App* scriptgen = app.add_subcommand(
      "scriptgen", "Record oracle responses into a ScriptBook directory");
  add_common(scriptgen, options);
  scriptgen->add_option("--suite", suite_path, "Suite file (JSONL)");
  scriptgen->add_option("--book", scriptgen_out, "Output ScriptBook directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (task_id.empty() == goal_text.empty()) {
        std::cerr << "error: provide exactly one of --task or --goal\n";
        return kExitConfigError;
      }
      return cmd_run(options, task_id, goal_text, suite_path, budget);
    }
    if (bench->parsed()) return cmd_bench(options, suite_path);
    if (ablate->parsed()) {
      if (components.empty()) components = {"all"};
      return cmd_ablate(options, suite_path, components);
    }
    if (replay->parsed()) return cmd_replay(options, trace_path);
    if (analyze->parsed()) {
      if (report_path.empty() && points_path.empty()) {
        std::cerr << "error: analyze needs --report and/or --points\n";
        return kExitConfigError;
      }
      if (!report_path.empty() && pricing_path.empty()) {
        std::cerr << "error: --report requires --pricing\n";
        return kExitConfigError;
      }
      return cmd_analyze(options, report_path, pricing_path, points_path);
    }
    if (scriptgen->parsed())
      return cmd_scriptgen(options, suite_path, scriptgen_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitConfigError;
}
