#include "spanex/reformulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace spanex {

std::string_view task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::classification: return "classification";
    case TaskKind::regression: return "regression";
    case TaskKind::qa: return "qa";
  }
  throw std::logic_error("task_kind_name: unknown kind");
}

TaskKind task_kind_from_name(std::string_view name) {
  if (name == "classification") return TaskKind::classification;
  if (name == "regression") return TaskKind::regression;
  if (name == "qa") return TaskKind::qa;
  throw std::invalid_argument("unknown task_kind '" + std::string(name) + "'");
}

LabelSet::LabelSet(std::vector<std::string> descriptions)
    : descriptions_(std::move(descriptions)) {
  if (descriptions_.empty()) {
    throw std::invalid_argument("label set: needs at least one description");
  }
  for (std::size_t i = 0; i < descriptions_.size(); ++i) {
    if (descriptions_[i].empty()) {
      throw std::invalid_argument("label set: description " + std::to_string(i) +
                                  " is empty");
    }
    for (std::size_t j = 0; j < descriptions_.size(); ++j) {
      if (i == j) continue;
      if (descriptions_[j].find(descriptions_[i]) != std::string::npos) {
        throw std::invalid_argument("label set: '" + descriptions_[i] +
                                    "' is a substring of '" + descriptions_[j] +
                                    "', options would be ambiguous");
      }
    }
  }
}

LabelSet::Rendered LabelSet::render_options() const {
  Rendered out;
  const std::size_t k = descriptions_.size();
  for (std::size_t i = 0; i < k; ++i) {
    if (i > 0) {
      out.text += (k == 2) ? " " : ", ";
      if (i + 1 == k) out.text += "or ";
    }
    out.label_spans.push_back({out.text.size(), out.text.size() + descriptions_[i].size()});
    out.text += descriptions_[i];
  }
  out.text += '?';
  return out;
}

namespace {

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  std::string s(buf);
  if (s == "-0" || s.rfind("-0.", 0) == 0) {
    // -0.0000 with all-zero digits means the value is a signed zero
    if (s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  }
  return s;
}

std::string trim_trailing_zeros(std::string s) {
  if (s.find('.') == std::string::npos) return s;
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

}  // namespace

BucketSpec::BucketSpec(double min_value, double max_value, int bucket_count)
    : min_value_(min_value), max_value_(max_value) {
  if (!(min_value < max_value)) {
    throw std::invalid_argument("bucket spec: min_value must be below max_value");
  }
  if (bucket_count < 2 || bucket_count > 64) {
    throw std::invalid_argument("bucket spec: bucket_count must be in [2, 64], got " +
                                std::to_string(bucket_count));
  }
  // Render with the fewest decimals that reproduce every center faithfully
  // (e.g. step 0.25 needs two, so "0.25" stays "0.25"), then strip trailing
  // zeros down to one decimal: 0.00 0.25 0.50 ... becomes 0.0 0.25 0.5 ...
  const double step = (max_value - min_value) / (bucket_count - 1);
  const double tolerance = step * 1e-6;
  for (int decimals = 1; decimals <= 17; ++decimals) {
    rendered_.clear();
    std::map<std::string, int> seen;
    bool ok = true;
    for (int i = 0; i < bucket_count; ++i) {
      const double center = min_value + i * step;
      std::string s = format_fixed(center, decimals);
      if (std::abs(std::strtod(s.c_str(), nullptr) - center) > tolerance ||
          !seen.emplace(s, i).second) {
        ok = false;
        break;
      }
      rendered_.push_back(std::move(s));
    }
    if (ok) break;
    rendered_.clear();
  }
  if (static_cast<int>(rendered_.size()) != bucket_count) {
    throw std::invalid_argument("bucket spec: centers do not render distinctly");
  }
  std::map<std::string, int> stripped;
  for (std::size_t i = 0; i < rendered_.size(); ++i) {
    rendered_[i] = trim_trailing_zeros(std::move(rendered_[i]));
    if (!stripped.emplace(rendered_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("bucket spec: centers do not render distinctly");
    }
  }
}

double BucketSpec::center(int index) const {
  if (index < 0 || index >= count()) {
    throw std::out_of_range("bucket spec: index " + std::to_string(index) +
                            " out of range");
  }
  return min_value_ + index * step();
}

BucketSpec::Rendered BucketSpec::render_all() const {
  Rendered out;
  for (std::size_t i = 0; i < rendered_.size(); ++i) {
    if (i > 0) out.text += ' ';
    out.bucket_spans.push_back({out.text.size(), out.text.size() + rendered_[i].size()});
    out.text += rendered_[i];
  }
  return out;
}

SpanExample classify_to_span(const std::optional<std::string>& text_a,
                             const std::optional<std::string>& text_b,
                             const LabelSet& labels, int gold) {
  if (gold < 0 || static_cast<std::size_t>(gold) >= labels.size()) {
    throw std::invalid_argument("classify_to_span: gold label " + std::to_string(gold) +
                                " out of range");
  }
  auto options = labels.render_options();

  SpanExample ex;
  ex.task_kind = TaskKind::classification;
  ex.gold_label = gold;
  std::size_t option_offset = 0;
  if (text_a && text_b) {
    // Sentence pair: the first sentence joins the source, options appended.
    ex.source_text = *text_a + " " + options.text;
    ex.auxiliary_text = *text_b;
    option_offset = text_a->size() + 1;
  } else {
    // Single sentence: the whole input guides extraction from the options.
    ex.source_text = options.text;
    ex.auxiliary_text = text_a ? *text_a : (text_b ? *text_b : "");
  }
  CharSpan within = options.label_spans[static_cast<std::size_t>(gold)];
  ex.gold_char_span = {option_offset + within.begin, option_offset + within.end};
  return ex;
}

SpanExample regress_to_span(const std::optional<std::string>& text_a,
                            const std::optional<std::string>& text_b,
                            const BucketSpec& spec, double gold_value) {
  double v = gold_value;
  if (v < spec.min_value() || v > spec.max_value()) {
    std::cerr << "warning: regress_to_span clamping value " << v << " into ["
              << spec.min_value() << ", " << spec.max_value() << "]\n";
    v = std::clamp(v, spec.min_value(), spec.max_value());
  }
  auto buckets = spec.render_all();

  SpanExample ex;
  ex.task_kind = TaskKind::regression;
  ex.gold_value = gold_value;
  std::size_t bucket_offset = 0;
  if (text_a && text_b) {
    ex.source_text = *text_a + " " + buckets.text;
    ex.auxiliary_text = *text_b;
    bucket_offset = text_a->size() + 1;
  } else {
    ex.source_text = buckets.text;
    ex.auxiliary_text = text_a ? *text_a : (text_b ? *text_b : "");
  }
  CharSpan within = buckets.bucket_spans[static_cast<std::size_t>(value_to_bucket(v, spec))];
  ex.gold_char_span = {bucket_offset + within.begin, bucket_offset + within.end};
  return ex;
}

SpanExample qa_to_span(const std::string& context, const std::string& question,
                       std::optional<CharSpan> answer_span, bool mark_unanswerable,
                       bool append_unanswerable) {
  static const std::string kUnanswerable = "unanswerable";

  SpanExample ex;
  ex.task_kind = TaskKind::qa;
  ex.auxiliary_text = question;
  if (mark_unanswerable) {
    if (answer_span) {
      throw std::invalid_argument("qa_to_span: unanswerable example cannot carry an answer span");
    }
    ex.source_text = context + " " + kUnanswerable;
    ex.gold_char_span = {context.size() + 1, ex.source_text.size()};
    return ex;
  }
  if (!answer_span) {
    throw std::invalid_argument("qa_to_span: answerable example needs an answer span");
  }
  if (answer_span->empty() || answer_span->end > context.size()) {
    throw std::runtime_error("qa_to_span: answer span [" +
                             std::to_string(answer_span->begin) + ", " +
                             std::to_string(answer_span->end) +
                             ") not found within context bounds");
  }
  ex.source_text = context;
  if (append_unanswerable) ex.source_text += " " + kUnanswerable;
  ex.gold_char_span = *answer_span;
  return ex;
}

std::optional<CharSpan> find_answer_span(const std::string& context,
                                         const std::string& answer) {
  if (answer.empty()) return std::nullopt;
  std::size_t pos = context.find(answer);
  if (pos == std::string::npos) return std::nullopt;
  return CharSpan{pos, pos + answer.size()};
}

namespace {

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::size_t token_overlap(const std::vector<std::string>& a,
                          const std::vector<std::string>& b) {
  std::map<std::string, std::size_t> counts;
  for (const auto& w : a) ++counts[w];
  std::size_t overlap = 0;
  for (const auto& w : b) {
    auto it = counts.find(w);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  return overlap;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::pair<int, bool> span_to_label(std::string_view extracted, const LabelSet& labels) {
  const std::string norm = normalize_whitespace(extracted);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (norm == normalize_whitespace(labels.descriptions()[i])) {
      return {static_cast<int>(i), true};
    }
  }
  const auto extracted_words = split_words(norm);
  std::size_t best = 0, best_overlap = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t overlap = token_overlap(split_words(labels.descriptions()[i]), extracted_words);
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = i;
    }
  }
  return {static_cast<int>(best), false};
}

std::pair<double, bool> span_to_value(std::string_view extracted, const BucketSpec& spec) {
  const std::string norm = normalize_whitespace(extracted);
  const auto& rendered = spec.rendered();
  for (int i = 0; i < spec.count(); ++i) {
    if (norm == rendered[static_cast<std::size_t>(i)]) return {spec.center(i), true};
  }
  int best = 0;
  std::size_t best_distance = std::numeric_limits<std::size_t>::max();
  for (int i = 0; i < spec.count(); ++i) {
    std::size_t d = edit_distance(norm, rendered[static_cast<std::size_t>(i)]);
    if (d < best_distance) {
      best_distance = d;
      best = i;
    }
  }
  return {spec.center(best), false};
}

int value_to_bucket(double value, const BucketSpec& spec) {
  const double x = (value - spec.min_value()) / spec.step();
  auto index = static_cast<long>(std::ceil(x - 0.5));  // midpoint rounds down
  index = std::clamp(index, 0L, static_cast<long>(spec.count() - 1));
  return static_cast<int>(index);
}

}  // namespace spanex
