#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spanex/dataset.hpp"
#include "spanex/metrics.hpp"
#include "spanex/model.hpp"
#include "spanex/reformulation.hpp"
#include "spanex/span_decoder.hpp"
#include "spanex/tokenizer.hpp"

namespace spanex {

// A named dataset pair plus everything needed to score predictions against
// it. labels/buckets are present for classification/regression respectively.
struct Task {
  std::string name;
  TaskKind kind = TaskKind::qa;
  std::string metric = "exact_match";  // exact_match | accuracy | matthews |
                                       // pearson_spearman_avg
  std::optional<LabelSet> labels;
  std::optional<BucketSpec> buckets;
  std::vector<SpanExample> train;
  std::vector<SpanExample> dev;
};

// Task description file: JSON with name, kind, metric, labels or buckets, and
// train/dev JSONL paths resolved relative to the file's directory.
Task load_task(const std::string& path);
void save_task(const Task& task, const std::string& dir);

// A SpanExample tokenized and packed for the encoder, with the bookkeeping
// needed to map a predicted token span back to source text.
struct CompiledExample {
  ModelInput input;
  TokenSpan gold_span;                  // token positions within input
  std::vector<CharSpan> source_offsets; // per source token, into source_text
  SpanExample example;
};

CompiledExample compile_example(const SpanExample& example, const Vocabulary& vocab,
                                std::size_t max_len,
                                const TokenizerOptions& options = {});
std::vector<CompiledExample> compile_dataset(const std::vector<SpanExample>& examples,
                                             const Vocabulary& vocab,
                                             std::size_t max_len,
                                             const TokenizerOptions& options = {});

struct Prediction {
  TokenSpan span;
  std::string text;  // extracted source text (single start token when end < start)
  double log_score = 0.0;
};

Prediction predict(const Model& model, const CompiledExample& example,
                   DecodeMode mode = DecodeMode::independent, int max_span_len = 30);

// Scores extracted spans against the task's metric. n = examples scored;
// valid_predictions counts spans that mapped back to a label/bucket exactly
// (for exact_match, spans equal to some label's text — trivially n for QA).
MetricReport evaluate(const Model& model, const std::vector<CompiledExample>& examples,
                      const Task& task, DecodeMode mode = DecodeMode::independent,
                      int max_span_len = 30);

// Forward + loss for one example; with grads != nullptr also accumulates
// dLoss/dParams into grads (sum-over-batch convention).
double example_loss(const Model& model, const CompiledExample& example,
                    EncoderParams* encoder_grads = nullptr,
                    SpanHead* head_grads = nullptr);

}  // namespace spanex
