#pragma once

#include <string>
#include <vector>

#include "spanex/model.hpp"
#include "spanex/pipeline.hpp"

namespace spanex {

// Smallest gradient magnitude the finite-difference probe can resolve to
// five digits; tensors smaller than this in both views are compared
// against it instead (see gradient_check).
inline constexpr double kGradScaleFloor = 1e-4;

struct TensorCheck {
  std::string name;
  double max_abs_diff = 0.0;  // worst |analytic - numeric| entry
  double rel_error = 0.0;     // max_abs_diff / max(inf-norms, floor)
  long entries = 0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double fd_step = 1e-3;
  double tolerance = 1e-5;
  bool pass = false;
};

// Central finite differences (two forward passes per entry, no backward code
// involved) against the analytic gradients, per parameter tensor, over the
// summed batch loss. Restores the model's weights exactly.
GradCheckReport gradient_check(Model& model, const std::vector<CompiledExample>& batch,
                               double fd_step = 1e-3, double tolerance = 1e-5);

// One "name  rel_error  (pass|FAIL)" line per tensor plus a summary line.
std::string format_report(const GradCheckReport& report);

// Random encoded example (ids, segments, mask, gold span) for probing
// gradients without a tokenizer; p = source_tokens + auxiliary_tokens + 2.
CompiledExample make_probe_example(int vocab_size, int source_tokens,
                                   int auxiliary_tokens, std::mt19937_64& rng);

}  // namespace spanex
