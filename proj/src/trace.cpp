#include "agentloom/trace.hpp"

#include <fstream>
#include <sstream>

#include "agentloom/util.hpp"
#include "json.hpp"

namespace agentloom {

using nlohmann::ordered_json;

std::string TraceRecord::to_line() const {
  ordered_json j;
  j["run"] = run_id;
  j["cycle"] = cycle_index;
  j["node"] = node;
  j["start"] = start_ordinal;
  j["end"] = end_ordinal;
  j["in"] = input_digest;
  j["out"] = output_digest;
  if (usage) {
    j["tokens"] = {{"in", usage->input_tokens},
                   {"out", usage->output_tokens},
                   {"model", usage->model_name}};
  }
  j["status"] = status;
  if (!detail.empty()) j["detail"] = detail;
  return j.dump();
}

TraceRecord TraceRecord::from_line(const std::string& line) {
  ordered_json j = ordered_json::parse(line);
  TraceRecord r;
  r.run_id = j.value("run", "");
  r.cycle_index = j.value("cycle", 0);
  r.node = j.value("node", "");
  r.start_ordinal = j.value("start", std::uint64_t{0});
  r.end_ordinal = j.value("end", std::uint64_t{0});
  r.input_digest = j.value("in", "");
  r.output_digest = j.value("out", "");
  if (j.contains("tokens")) {
    llm::TokenUsage usage;
    usage.input_tokens = j["tokens"].value("in", std::int64_t{0});
    usage.output_tokens = j["tokens"].value("out", std::int64_t{0});
    usage.model_name = j["tokens"].value("model", "");
    r.usage = usage;
  }
  r.status = j.value("status", "ok");
  r.detail = j.value("detail", "");
  return r;
}

std::vector<std::string> TraceLog::to_lines() const {
  std::vector<std::string> lines;
  lines.reserve(records_.size());
  for (const auto& record : records_) lines.push_back(record.to_line());
  return lines;
}

std::string TraceLog::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& record : records_) {
    h = fnv1a64(record.to_line(), h);
    h = fnv1a64("\n", h);
  }
  return hex16(h);
}

std::string TraceLog::to_text() const {
  std::ostringstream os;
  for (const auto& line : to_lines()) os << line << "\n";
  ordered_json trailer;
  trailer["run"] = run_id_;
  trailer["node"] = "run_end";
  trailer["records"] = records_.size();
  trailer["hash"] = hash();
  os << trailer.dump() << "\n";
  return os.str();
}

TraceLog TraceLog::parse(const std::string& text) {
  TraceLog log;
  for (const auto& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    ordered_json j = ordered_json::parse(line);
    if (j.value("node", "") == "run_end") {
      log.run_id_ = j.value("run", log.run_id_);
      continue;  // trailer carries the recorded hash; not a body record
    }
    log.records_.push_back(TraceRecord::from_line(line));
    if (log.run_id_.empty()) log.run_id_ = log.records_.back().run_id;
  }
  if (!log.records_.empty())
    log.ordinal_ = log.records_.back().end_ordinal;
  return log;
}

void TraceLog::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  out << to_text();
}

TraceLog TraceLog::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read trace file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

int TraceLog::cycle_count() const {
  int n = 0;
  for (const auto& record : records_)
    if (record.node == "route") ++n;
  return n;
}

void CostLedger::add(const std::string& agent, const llm::TokenUsage& usage) {
  Cell& cell = cells[agent][usage.model_name];
  cell.input_tokens += usage.input_tokens;
  cell.output_tokens += usage.output_tokens;
}

std::int64_t CostLedger::total_input() const {
  std::int64_t total = 0;
  for (const auto& [agent, models] : cells)
    for (const auto& [model, cell] : models) total += cell.input_tokens;
  return total;
}

std::int64_t CostLedger::total_output() const {
  std::int64_t total = 0;
  for (const auto& [agent, models] : cells)
    for (const auto& [model, cell] : models) total += cell.output_tokens;
  return total;
}

std::vector<llm::TokenUsage> CostLedger::flatten() const {
  std::vector<llm::TokenUsage> usages;
  for (const auto& [agent, models] : cells)
    for (const auto& [model, cell] : models)
      usages.push_back({cell.input_tokens, cell.output_tokens, model});
  return usages;
}

CostLedger CostLedger::from_trace(const TraceLog& trace) {
  CostLedger ledger;
  for (const auto& record : trace.records())
    if (record.usage) ledger.add(record.node, *record.usage);
  return ledger;
}

std::string CostLedger::to_text() const {
  std::ostringstream os;
  os << "agent              model                in_tokens  out_tokens\n";
  for (const auto& [agent, models] : cells) {
    for (const auto& [model, cell] : models) {
      os << agent;
      for (std::size_t i = agent.size(); i < 19; ++i) os << ' ';
      os << model;
      for (std::size_t i = model.size(); i < 21; ++i) os << ' ';
      os << cell.input_tokens << "  " << cell.output_tokens << "\n";
    }
  }
  os << "total in=" << total_input() << " out=" << total_output() << "\n";
  return os.str();
}

}  // namespace agentloom
