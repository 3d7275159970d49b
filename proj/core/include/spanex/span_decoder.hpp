#pragma once

#include <vector>

#include <Eigen/Dense>

#include "spanex/tokenizer.hpp"

namespace spanex {

// The two trainable vectors that score each encoder row as a span start or a
// span end.
struct SpanHead {
  Eigen::VectorXd d_start;
  Eigen::VectorXd d_end;
};

SpanHead make_span_head(int hidden_dim);

// Start/end probabilities over all p positions. Non-source positions get a
// -inf logit before the softmax, so their probability is exactly zero and
// both vectors each sum to 1 over the source tokens alone.
struct SpanDistribution {
  Eigen::VectorXd p_start;
  Eigen::VectorXd p_end;
  Eigen::VectorXd log_p_start;  // -inf off-source
  Eigen::VectorXd log_p_end;
  std::vector<bool> source_mask;
};

enum class DecodeMode { independent, joint };

struct SpanPrediction {
  int start = 0;
  int end = 0;  // inclusive; independent mode may yield end < start
  double log_score = 0.0;
};

// logits = X_sf * d_start (resp. d_end), masked to the source tokens, then a
// softmax. Throws std::invalid_argument when the mask marks no position.
SpanDistribution score_spans(const Eigen::MatrixXd& x_sf, const SpanHead& head,
                             const std::vector<bool>& source_mask);

// L = -log p_start(a*) - log p_end(b*). Throws std::invalid_argument when a
// gold index falls outside the source mask.
double span_loss(const SpanDistribution& dist, TokenSpan gold);

// Gradient of span_loss: accumulates dL/d(d_start), dL/d(d_end) into
// head_grads and returns dL/dX_sf. Masked positions contribute exactly zero.
Eigen::MatrixXd span_loss_backward(const SpanDistribution& dist, TokenSpan gold,
                                   const Eigen::MatrixXd& x_sf, const SpanHead& head,
                                   SpanHead& head_grads);

// independent: argmax of each distribution separately (end < start possible).
// joint: the pair maximizing log p_start(a) + log p_end(b) subject to
// a <= b <= a + max_span_len - 1. Ties break to the smallest start, then the
// smallest end.
SpanPrediction decode(const SpanDistribution& dist, DecodeMode mode,
                      int max_span_len = 30);

}  // namespace spanex
