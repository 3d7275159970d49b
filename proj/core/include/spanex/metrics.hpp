#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spanex {

struct MetricReport {
  std::string metric;
  double value = 0.0;
  long n = 0;                  // examples scored
  long valid_predictions = 0;  // predictions that mapped back cleanly
};

// Trim, collapse whitespace runs, ASCII-lowercase — the normalization under
// which exact match is judged.
std::string normalize_for_match(std::string_view text);

bool exact_match(std::string_view predicted, std::string_view gold);

// Multi-class Matthews correlation (reduces to the usual binary MCC); 0 when
// the denominator vanishes. Throws std::invalid_argument on length mismatch.
double matthews_corr(const std::vector<int>& predicted, const std::vector<int>& gold);

double pearson_corr(const std::vector<double>& a, const std::vector<double>& b);

// Pearson correlation of average ranks (ties share their rank mean).
double spearman_corr(const std::vector<double>& a, const std::vector<double>& b);

double pearson_spearman_avg(const std::vector<double>& predicted,
                            const std::vector<double>& gold);

}  // namespace spanex
