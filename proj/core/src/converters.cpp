#include "spanex/converters.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace spanex {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, '\t')) fields.push_back(field);
  if (!line.empty() && line.back() == '\t') fields.emplace_back();
  return fields;
}

class TsvReader {
 public:
  explicit TsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw std::runtime_error("cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in_, header)) {
      throw std::runtime_error(path + ": missing header row");
    }
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const auto names = split_tabs(header);
    for (std::size_t i = 0; i < names.size(); ++i) columns_[names[i]] = i;
  }

  std::size_t column(const std::string& name) const {
    auto it = columns_.find(name);
    if (it == columns_.end()) {
      throw std::runtime_error(path_ + ": no column named '" + name + "'");
    }
    return it->second;
  }

  // False at end of file; throws (with line number) on ragged rows.
  bool next_row(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      fields = split_tabs(line);
      if (fields.size() < columns_.size()) {
        throw std::runtime_error(path_ + ":" + std::to_string(line_number_) +
                                 ": expected " + std::to_string(columns_.size()) +
                                 " columns, found " + std::to_string(fields.size()));
      }
      return true;
    }
    return false;
  }

  std::string location() const { return path_ + ":" + std::to_string(line_number_); }

 private:
  std::string path_;
  std::ifstream in_;
  std::map<std::string, std::size_t> columns_;
  std::size_t line_number_ = 1;  // header consumed
};

int label_index(const LabelSet& labels, const std::map<std::string, int>& mapping,
                const std::string& raw, const std::string& location) {
  auto it = mapping.find(raw);
  if (it == mapping.end()) {
    throw std::runtime_error(location + ": unknown label '" + raw + "'");
  }
  if (it->second < 0 || static_cast<std::size_t>(it->second) >= labels.size()) {
    throw std::logic_error("label mapping out of range");
  }
  return it->second;
}

}  // namespace

GlueFormat glue_format_from_name(std::string_view name) {
  if (name == "sst2") return GlueFormat::sst2;
  if (name == "mnli") return GlueFormat::mnli;
  if (name == "rte") return GlueFormat::rte;
  if (name == "stsb") return GlueFormat::stsb;
  throw std::invalid_argument("unknown GLUE format '" + std::string(name) + "'");
}

std::string_view glue_format_name(GlueFormat format) {
  switch (format) {
    case GlueFormat::sst2: return "sst2";
    case GlueFormat::mnli: return "mnli";
    case GlueFormat::rte: return "rte";
    case GlueFormat::stsb: return "stsb";
  }
  throw std::logic_error("glue_format_name: unknown format");
}

LabelSet glue_labels(GlueFormat format) {
  switch (format) {
    case GlueFormat::sst2: return LabelSet({"positive", "negative"});
    case GlueFormat::mnli: return LabelSet({"entailment", "contradiction", "neutral"});
    case GlueFormat::rte: return LabelSet({"entailment", "not"});
    case GlueFormat::stsb:
      throw std::invalid_argument("stsb is a regression dataset; use stsb_buckets()");
  }
  throw std::logic_error("glue_labels: unknown format");
}

BucketSpec stsb_buckets() { return BucketSpec(0.0, 5.0, 21); }

std::vector<SpanExample> convert_glue_tsv(const std::string& path, GlueFormat format) {
  TsvReader reader(path);
  std::vector<SpanExample> out;
  std::vector<std::string> fields;

  switch (format) {
    case GlueFormat::sst2: {
      const LabelSet labels = glue_labels(format);
      const std::size_t sentence = reader.column("sentence");
      const std::size_t label = reader.column("label");
      // The distributed files use 1 for positive, 0 for negative.
      const std::map<std::string, int> mapping{{"1", 0}, {"0", 1}};
      while (reader.next_row(fields)) {
        const int gold = label_index(labels, mapping, fields[label], reader.location());
        out.push_back(classify_to_span(fields[sentence], std::nullopt, labels, gold));
      }
      break;
    }
    case GlueFormat::mnli: {
      const LabelSet labels = glue_labels(format);
      const std::size_t s1 = reader.column("sentence1");
      const std::size_t s2 = reader.column("sentence2");
      const std::size_t label = reader.column("gold_label");
      const std::map<std::string, int> mapping{
          {"entailment", 0}, {"contradiction", 1}, {"neutral", 2}};
      while (reader.next_row(fields)) {
        const int gold = label_index(labels, mapping, fields[label], reader.location());
        out.push_back(classify_to_span(fields[s1], fields[s2], labels, gold));
      }
      break;
    }
    case GlueFormat::rte: {
      const LabelSet labels = glue_labels(format);
      const std::size_t s1 = reader.column("sentence1");
      const std::size_t s2 = reader.column("sentence2");
      const std::size_t label = reader.column("label");
      const std::map<std::string, int> mapping{{"entailment", 0},
                                               {"not_entailment", 1}};
      while (reader.next_row(fields)) {
        const int gold = label_index(labels, mapping, fields[label], reader.location());
        out.push_back(classify_to_span(fields[s1], fields[s2], labels, gold));
      }
      break;
    }
    case GlueFormat::stsb: {
      const BucketSpec buckets = stsb_buckets();
      const std::size_t s1 = reader.column("sentence1");
      const std::size_t s2 = reader.column("sentence2");
      const std::size_t score = reader.column("score");
      while (reader.next_row(fields)) {
        double value = 0.0;
        try {
          value = std::stod(fields[score]);
        } catch (const std::exception&) {
          throw std::runtime_error(reader.location() + ": bad score '" +
                                   fields[score] + "'");
        }
        out.push_back(regress_to_span(fields[s1], fields[s2], buckets, value));
      }
      break;
    }
  }
  return out;
}

std::vector<SpanExample> convert_squad_json(const std::string& path,
                                            bool append_unanswerable) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }

  std::vector<SpanExample> out;
  for (const auto& article : j.at("data")) {
    for (const auto& paragraph : article.at("paragraphs")) {
      const auto context = paragraph.at("context").get<std::string>();
      for (const auto& qa : paragraph.at("qas")) {
        const auto question = qa.at("question").get<std::string>();
        const bool impossible = qa.value("is_impossible", false);
        if (impossible) {
          out.push_back(qa_to_span(context, question, std::nullopt, true));
          continue;
        }
        const auto& answers = qa.at("answers");
        if (answers.empty()) {
          throw std::runtime_error(path + ": question '" + question +
                                   "' has no answers and is not impossible");
        }
        const auto text = answers[0].at("text").get<std::string>();
        std::optional<CharSpan> span;
        if (answers[0].contains("answer_start")) {
          const auto start = answers[0].at("answer_start").get<std::size_t>();
          if (context.compare(start, text.size(), text) == 0) {
            span = CharSpan{start, start + text.size()};
          }
        }
        if (!span) span = find_answer_span(context, text);
        if (!span) {
          throw std::runtime_error(path + ": answer '" + text +
                                   "' not found in its context");
        }
        out.push_back(qa_to_span(context, question, span, false, append_unanswerable));
      }
    }
  }
  return out;
}

}  // namespace spanex
