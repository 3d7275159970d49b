#include "spanex/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace spanex {

namespace {

double batch_loss(const Model& model, const std::vector<CompiledExample>& batch) {
  double loss = 0.0;
  for (const auto& example : batch) loss += example_loss(model, example);
  return loss;
}

}  // namespace

GradCheckReport gradient_check(Model& model, const std::vector<CompiledExample>& batch,
                               double fd_step, double tolerance) {
  if (batch.empty()) throw std::invalid_argument("gradient_check: empty batch");
  if (!(fd_step > 0)) throw std::invalid_argument("gradient_check: fd_step must be > 0");

  EncoderParams analytic_encoder = make_encoder_params(model.config);
  SpanHead analytic_head = make_span_head(model.config.hidden_dim);
  for (const auto& example : batch) {
    example_loss(model, example, &analytic_encoder, &analytic_head);
  }
  auto analytic_views = named_tensors(analytic_encoder, analytic_head);
  auto param_views = named_tensors(model);

  GradCheckReport report;
  report.fd_step = fd_step;
  report.tolerance = tolerance;
  report.pass = true;

  for (std::size_t i = 0; i < param_views.size(); ++i) {
    const auto& view = param_views[i];
    const auto& analytic = analytic_views[i];

    TensorCheck check;
    check.name = view.name;
    check.entries = view.size();
    double analytic_inf = 0.0, numeric_inf = 0.0;
    for (long idx = 0; idx < view.size(); ++idx) {
      const double saved = view.data[idx];
      view.data[idx] = saved + fd_step;
      const double loss_plus = batch_loss(model, batch);
      view.data[idx] = saved - fd_step;
      const double loss_minus = batch_loss(model, batch);
      view.data[idx] = saved;

      const double numeric = (loss_plus - loss_minus) / (2.0 * fd_step);
      const double diff = std::abs(analytic.data[idx] - numeric);
      check.max_abs_diff = std::max(check.max_abs_diff, diff);
      analytic_inf = std::max(analytic_inf, std::abs(analytic.data[idx]));
      numeric_inf = std::max(numeric_inf, std::abs(numeric));
    }
    // Central differences on an O(1) loss carry ~1e-10 of cancellation
    // noise in double precision, so gradients below ~1e-4 cannot be
    // resolved to five digits numerically. The floor keeps the relative
    // error meaningful for structurally-zero tensors (the last layer's
    // LayerNorm bias shifts every position equally, which the masked
    // span softmax cannot see).
    const double denom = std::max({analytic_inf, numeric_inf, kGradScaleFloor});
    check.rel_error = check.max_abs_diff / denom;
    check.pass = check.rel_error <= tolerance;
    report.pass = report.pass && check.pass;
    report.tensors.push_back(std::move(check));
  }
  return report;
}

CompiledExample make_probe_example(int vocab_size, int source_tokens,
                                   int auxiliary_tokens, std::mt19937_64& rng) {
  if (source_tokens < 1 || auxiliary_tokens < 0) {
    throw std::invalid_argument("make_probe_example: need >= 1 source token");
  }
  const int p = source_tokens + auxiliary_tokens + 2;
  std::uniform_int_distribution<int> pick_id(0, vocab_size - 1);

  CompiledExample example;
  ModelInput& input = example.input;
  input.source_token_count = static_cast<std::size_t>(source_tokens);
  input.auxiliary_token_count = static_cast<std::size_t>(auxiliary_tokens);
  for (int t = 0; t < p; ++t) {
    input.ids.push_back(pick_id(rng));
    input.position_ids.push_back(t);
    const bool in_source = t >= 1 && t <= source_tokens;
    input.segment_ids.push_back(t <= source_tokens + 1 ? 0 : 1);
    input.source_mask.push_back(in_source);
  }
  std::uniform_int_distribution<int> pick_start(1, source_tokens);
  const int a = pick_start(rng);
  std::uniform_int_distribution<int> pick_end(a, source_tokens);
  example.gold_span = {static_cast<std::size_t>(a),
                       static_cast<std::size_t>(pick_end(rng))};
  return example;
}

std::string format_report(const GradCheckReport& report) {
  std::string out;
  char line[160];
  for (const auto& check : report.tensors) {
    std::snprintf(line, sizeof(line), "%-28s rel_error %.3e  %s\n",
                  check.name.c_str(), check.rel_error,
                  check.pass ? "pass" : "FAIL");
    out += line;
  }
  std::snprintf(line, sizeof(line),
                "%zu tensors, fd_step %.1e, tolerance %.1e: %s\n",
                report.tensors.size(), report.fd_step, report.tolerance,
                report.pass ? "all pass" : "FAILURES present");
  out += line;
  return out;
}

}  // namespace spanex
