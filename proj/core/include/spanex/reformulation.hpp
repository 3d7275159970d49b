#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spanex/tokenizer.hpp"

namespace spanex {

enum class TaskKind { classification, regression, qa };

std::string_view task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(std::string_view name);

/// A unified training example. The gold span always lies inside the
/// source text; the auxiliary text guides extraction.
struct SpanExample {
  std::string source_text;
  std::string auxiliary_text;
  CharSpan gold_char_span;
  TaskKind task_kind = TaskKind::qa;
  std::optional<int> gold_label;
  std::optional<double> gold_value;

  std::string gold_text() const {
    return source_text.substr(gold_char_span.begin, gold_char_span.size());
  }
};

/// Ordered natural-language label descriptions, rendered as an appended
/// option list ("a or b?", "a, b, or c?"). Descriptions must be
/// non-empty, distinct, and no description may be a substring of another.
class LabelSet {
 public:
  explicit LabelSet(std::vector<std::string> descriptions);

  const std::vector<std::string>& descriptions() const { return descriptions_; }
  std::size_t size() const { return descriptions_.size(); }

  struct Rendered {
    std::string text;
    std::vector<CharSpan> label_spans;  // where each description landed
  };
  Rendered render_options() const;

 private:
  std::vector<std::string> descriptions_;
};

/// Evenly spaced bucket centers over [min_value, max_value], rendered with
/// the fewest decimals that reproduce every center faithfully, trailing
/// zeros trimmed down to at least one decimal: 21 buckets over [0, 5]
/// render as "0.0 0.25 0.5 0.75 1.0 ... 5.0".
class BucketSpec {
 public:
  BucketSpec(double min_value, double max_value, int bucket_count);

  double min_value() const { return min_value_; }
  double max_value() const { return max_value_; }
  int count() const { return static_cast<int>(rendered_.size()); }
  double step() const { return (max_value_ - min_value_) / (count() - 1); }
  double center(int index) const;
  const std::vector<std::string>& rendered() const { return rendered_; }

  struct Rendered {
    std::string text;  // space-separated bucket strings
    std::vector<CharSpan> bucket_spans;
  };
  Rendered render_all() const;

 private:
  double min_value_;
  double max_value_;
  std::vector<std::string> rendered_;
};

/// Classification as span extraction. With both sentences present the
/// first joins the source text ahead of the option list and the second is
/// auxiliary; with a single sentence the source holds only the option
/// list and the sentence is auxiliary.
SpanExample classify_to_span(const std::optional<std::string>& text_a,
                             const std::optional<std::string>& text_b,
                             const LabelSet& labels, int gold);

/// Regression as span extraction over rendered bucket values. Values
/// outside [min, max] are clamped (with a stderr warning).
SpanExample regress_to_span(const std::optional<std::string>& text_a,
                            const std::optional<std::string>& text_b,
                            const BucketSpec& spec, double gold_value);

/// Question answering: context is source, question is auxiliary. When
/// mark_unanswerable is set (or append_unanswerable configures the whole
/// dataset that way) the token "unanswerable" is appended to the source so
/// it can be extracted as a span.
SpanExample qa_to_span(const std::string& context, const std::string& question,
                       std::optional<CharSpan> answer_span, bool mark_unanswerable,
                       bool append_unanswerable = false);

/// First occurrence of answer text inside context, if any.
std::optional<CharSpan> find_answer_span(const std::string& context,
                                         const std::string& answer);

/// Inverse of classify_to_span: exact match after whitespace
/// normalization, else highest token overlap (ties to the lowest index)
/// with valid=false.
std::pair<int, bool> span_to_label(std::string_view extracted, const LabelSet& labels);

/// Inverse of regress_to_span: exact rendered-bucket match, else nearest
/// bucket by edit distance with valid=false.
std::pair<double, bool> span_to_value(std::string_view extracted, const BucketSpec& spec);

/// Index of the nearest bucket center; exact midpoints round down.
int value_to_bucket(double value, const BucketSpec& spec);

}  // namespace spanex
