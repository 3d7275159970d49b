#include "spanex/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace spanex {

std::string example_to_json_line(const SpanExample& example) {
  nlohmann::json j;
  j["task_kind"] = std::string(task_kind_name(example.task_kind));
  j["source"] = example.source_text;
  j["auxiliary"] = example.auxiliary_text;
  j["gold_span"] = {example.gold_char_span.begin, example.gold_char_span.end};
  if (example.gold_label) j["label"] = *example.gold_label;
  if (example.gold_value) j["value"] = *example.gold_value;
  return j.dump();
}

SpanExample example_from_json_line(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  SpanExample ex;
  ex.task_kind = task_kind_from_name(j.at("task_kind").get<std::string>());
  ex.source_text = j.at("source").get<std::string>();
  ex.auxiliary_text = j.at("auxiliary").get<std::string>();
  const auto& span = j.at("gold_span");
  if (!span.is_array() || span.size() != 2) {
    throw std::invalid_argument("gold_span must be [begin, end]");
  }
  ex.gold_char_span = {span[0].get<std::size_t>(), span[1].get<std::size_t>()};
  if (ex.gold_char_span.empty() || ex.gold_char_span.end > ex.source_text.size()) {
    throw std::invalid_argument("gold_span [" + std::to_string(ex.gold_char_span.begin) +
                                ", " + std::to_string(ex.gold_char_span.end) +
                                ") outside source of length " +
                                std::to_string(ex.source_text.size()));
  }
  if (j.contains("label")) ex.gold_label = j.at("label").get<int>();
  if (j.contains("value")) ex.gold_value = j.at("value").get<double>();
  return ex;
}

std::vector<SpanExample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::vector<SpanExample> examples;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      examples.push_back(example_from_json_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": " +
                               e.what());
    }
  }
  return examples;
}

void save_dataset(const std::vector<SpanExample>& examples, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    for (const auto& ex : examples) out << example_to_json_line(ex) << '\n';
    if (!out) throw std::runtime_error("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

}  // namespace spanex
