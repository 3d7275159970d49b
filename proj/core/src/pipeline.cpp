#include "spanex/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace spanex {

namespace {

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

}  // namespace

Task load_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open task file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("task file '" + path + "': " + e.what());
  }

  Task task;
  task.name = j.at("name").get<std::string>();
  task.kind = task_kind_from_name(j.at("kind").get<std::string>());
  task.metric = j.at("metric").get<std::string>();
  if (j.contains("labels")) {
    task.labels.emplace(j.at("labels").get<std::vector<std::string>>());
  }
  if (j.contains("buckets")) {
    const auto& b = j.at("buckets");
    task.buckets.emplace(b.at("min").get<double>(), b.at("max").get<double>(),
                         b.at("count").get<int>());
  }
  if (task.kind == TaskKind::classification && !task.labels) {
    throw std::runtime_error("task '" + task.name + "': classification needs labels");
  }
  if (task.kind == TaskKind::regression && !task.buckets) {
    throw std::runtime_error("task '" + task.name + "': regression needs buckets");
  }

  const auto dir = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& rel) { return (dir / rel).string(); };
  task.train = load_dataset(resolve(j.at("train").get<std::string>()));
  if (j.contains("dev")) task.dev = load_dataset(resolve(j.at("dev").get<std::string>()));
  return task;
}

void save_task(const Task& task, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir);
  save_dataset(task.train, (base / "train.jsonl").string());
  save_dataset(task.dev, (base / "dev.jsonl").string());

  nlohmann::json j;
  j["name"] = task.name;
  j["kind"] = std::string(task_kind_name(task.kind));
  j["metric"] = task.metric;
  if (task.labels) j["labels"] = task.labels->descriptions();
  if (task.buckets) {
    j["buckets"] = {{"min", task.buckets->min_value()},
                    {"max", task.buckets->max_value()},
                    {"count", task.buckets->count()}};
  }
  j["train"] = "train.jsonl";
  j["dev"] = "dev.jsonl";
  write_text_atomic((base / "task.json").string(), j.dump(2) + "\n");
}

CompiledExample compile_example(const SpanExample& example, const Vocabulary& vocab,
                                std::size_t max_len, const TokenizerOptions& options) {
  TokenSequence source = wordpiece_tokenize(example.source_text, vocab, options);
  TokenSequence auxiliary = wordpiece_tokenize(example.auxiliary_text, vocab, options);

  CompiledExample out;
  out.input = encode_pair(source, auxiliary, max_len, vocab);
  TokenSpan gold = align_char_span(example.gold_char_span, source);
  if (gold.last >= static_cast<int>(out.input.source_token_count)) {
    throw std::runtime_error("gold span tokens truncated away (source kept " +
                             std::to_string(out.input.source_token_count) + " of " +
                             std::to_string(source.size()) + " tokens)");
  }
  out.gold_span = {gold.first + 1, gold.last + 1};  // shift past [CLS]
  out.source_offsets.assign(source.offsets.begin(),
                            source.offsets.begin() +
                                static_cast<long>(out.input.source_token_count));
  out.example = example;
  return out;
}

std::vector<CompiledExample> compile_dataset(const std::vector<SpanExample>& examples,
                                             const Vocabulary& vocab,
                                             std::size_t max_len,
                                             const TokenizerOptions& options) {
  std::vector<CompiledExample> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    try {
      out.push_back(compile_example(examples[i], vocab, max_len, options));
    } catch (const std::exception& e) {
      throw std::runtime_error("example " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

Prediction predict(const Model& model, const CompiledExample& example,
                   DecodeMode mode, int max_span_len) {
  const Eigen::MatrixXd x_sf =
      encoder_forward(example.input, model.encoder, model.config);
  const SpanDistribution dist =
      score_spans(x_sf, model.span_head, example.input.source_mask);
  const SpanPrediction span = decode(dist, mode, max_span_len);

  Prediction pred;
  pred.span = {static_cast<std::size_t>(span.start), static_cast<std::size_t>(span.end)};
  pred.log_score = span.log_score;
  const auto& offsets = example.source_offsets;
  const std::size_t first = static_cast<std::size_t>(span.start - 1);
  // Independent decoding can emit end < start; the extraction then falls
  // back to the single start token.
  const std::size_t last =
      span.end >= span.start ? static_cast<std::size_t>(span.end - 1) : first;
  const CharSpan chars{offsets[first].begin, offsets[last].end};
  pred.text = example.example.source_text.substr(chars.begin, chars.size());
  return pred;
}

MetricReport evaluate(const Model& model, const std::vector<CompiledExample>& examples,
                      const Task& task, DecodeMode mode, int max_span_len) {
  MetricReport report;
  report.metric = task.metric;
  report.n = static_cast<long>(examples.size());
  if (examples.empty()) return report;

  std::vector<int> pred_labels, gold_labels;
  std::vector<double> pred_values, gold_values;
  long correct = 0;

  for (const auto& ex : examples) {
    const Prediction pred = predict(model, ex, mode, max_span_len);
    if (task.metric == "exact_match") {
      ++report.valid_predictions;
      if (exact_match(pred.text, ex.example.gold_text())) ++correct;
    } else if (task.metric == "accuracy" || task.metric == "matthews") {
      if (!task.labels) {
        throw std::runtime_error("task '" + task.name + "': metric '" + task.metric +
                                 "' needs labels");
      }
      if (!ex.example.gold_label) {
        throw std::runtime_error("task '" + task.name + "': example lacks gold label");
      }
      auto [label, valid] = span_to_label(pred.text, *task.labels);
      if (valid) ++report.valid_predictions;
      pred_labels.push_back(label);
      gold_labels.push_back(*ex.example.gold_label);
      if (label == *ex.example.gold_label) ++correct;
    } else if (task.metric == "pearson_spearman_avg") {
      if (!task.buckets) {
        throw std::runtime_error("task '" + task.name +
                                 "': metric 'pearson_spearman_avg' needs buckets");
      }
      if (!ex.example.gold_value) {
        throw std::runtime_error("task '" + task.name + "': example lacks gold value");
      }
      auto [value, valid] = span_to_value(pred.text, *task.buckets);
      if (valid) ++report.valid_predictions;
      pred_values.push_back(value);
      gold_values.push_back(*ex.example.gold_value);
    } else {
      throw std::runtime_error("unknown metric '" + task.metric + "'");
    }
  }

  if (task.metric == "exact_match" || task.metric == "accuracy") {
    report.value = static_cast<double>(correct) / static_cast<double>(report.n);
  } else if (task.metric == "matthews") {
    report.value = matthews_corr(pred_labels, gold_labels);
  } else {
    report.value = pearson_spearman_avg(pred_values, gold_values);
  }
  return report;
}

double example_loss(const Model& model, const CompiledExample& example,
                    EncoderParams* encoder_grads, SpanHead* head_grads) {
  if ((encoder_grads == nullptr) != (head_grads == nullptr)) {
    throw std::invalid_argument("example_loss: pass both gradient sinks or neither");
  }
  if (!encoder_grads) {
    const Eigen::MatrixXd x_sf =
        encoder_forward(example.input, model.encoder, model.config);
    return span_loss(score_spans(x_sf, model.span_head, example.input.source_mask),
                     example.gold_span);
  }

  ActivationCache cache;
  const Eigen::MatrixXd x_sf =
      encoder_forward(example.input, model.encoder, model.config, &cache);
  const SpanDistribution dist =
      score_spans(x_sf, model.span_head, example.input.source_mask);
  const double loss = span_loss(dist, example.gold_span);
  const Eigen::MatrixXd d_xsf =
      span_loss_backward(dist, example.gold_span, x_sf, model.span_head, *head_grads);
  encoder_backward(d_xsf, cache, model.encoder, model.config, *encoder_grads);
  return loss;
}

}  // namespace spanex
