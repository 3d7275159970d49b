#include "spanex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "spanex/tokenizer.hpp"

namespace spanex {

std::string normalize_for_match(std::string_view text) {
  std::string out = normalize_whitespace(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool exact_match(std::string_view predicted, std::string_view gold) {
  return normalize_for_match(predicted) == normalize_for_match(gold);
}

double matthews_corr(const std::vector<int>& predicted, const std::vector<int>& gold) {
  if (predicted.size() != gold.size()) {
    throw std::invalid_argument("matthews_corr: length mismatch");
  }
  const double s = static_cast<double>(predicted.size());
  if (predicted.empty()) return 0.0;

  std::map<int, double> pred_count, gold_count;
  double correct = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    ++pred_count[predicted[i]];
    ++gold_count[gold[i]];
    if (predicted[i] == gold[i]) ++correct;
  }
  double dot = 0.0, pred_sq = 0.0, gold_sq = 0.0;
  for (const auto& [label, count] : pred_count) {
    pred_sq += count * count;
    auto it = gold_count.find(label);
    if (it != gold_count.end()) dot += count * it->second;
  }
  for (const auto& [label, count] : gold_count) gold_sq += count * count;

  const double numerator = correct * s - dot;
  const double denominator = std::sqrt((s * s - pred_sq) * (s * s - gold_sq));
  if (denominator == 0.0) return 0.0;
  return numerator / denominator;
}

double pearson_corr(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson_corr: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return 0.0;
  return cov / std::sqrt(var_a * var_b);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_corr(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman_corr: length mismatch");
  return pearson_corr(average_ranks(a), average_ranks(b));
}

double pearson_spearman_avg(const std::vector<double>& predicted,
                            const std::vector<double>& gold) {
  return 0.5 * (pearson_corr(predicted, gold) + spearman_corr(predicted, gold));
}

}  // namespace spanex
