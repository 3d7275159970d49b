#include "spanex/span_decoder.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spanex {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Masked softmax that also returns stable log-probabilities (log-sum-exp on
// the shifted logits), keeping -inf exactly at masked positions.
void masked_softmax(const Eigen::VectorXd& logits, const std::vector<bool>& mask,
                    Eigen::VectorXd& probs, Eigen::VectorXd& log_probs) {
  const long p = logits.size();
  double max_logit = kNegInf;
  for (long t = 0; t < p; ++t) {
    if (mask[static_cast<std::size_t>(t)]) max_logit = std::max(max_logit, logits(t));
  }
  double total = 0.0;
  probs.setZero(p);
  for (long t = 0; t < p; ++t) {
    if (!mask[static_cast<std::size_t>(t)]) continue;
    probs(t) = std::exp(logits(t) - max_logit);
    total += probs(t);
  }
  const double log_total = std::log(total);
  log_probs.setConstant(p, kNegInf);
  for (long t = 0; t < p; ++t) {
    if (!mask[static_cast<std::size_t>(t)]) continue;
    probs(t) /= total;
    log_probs(t) = logits(t) - max_logit - log_total;
  }
}

void check_gold_index(const SpanDistribution& dist, int index, const char* which) {
  if (index < 0 || index >= dist.p_start.size() ||
      !dist.source_mask[static_cast<std::size_t>(index)]) {
    throw std::invalid_argument(std::string("span_loss: gold ") + which + " index " +
                                std::to_string(index) + " is not a source position");
  }
}

}  // namespace

SpanHead make_span_head(int hidden_dim) {
  if (hidden_dim < 1) throw std::invalid_argument("span head: hidden_dim must be >= 1");
  SpanHead head;
  head.d_start = Eigen::VectorXd::Zero(hidden_dim);
  head.d_end = Eigen::VectorXd::Zero(hidden_dim);
  return head;
}

SpanDistribution score_spans(const Eigen::MatrixXd& x_sf, const SpanHead& head,
                             const std::vector<bool>& source_mask) {
  if (static_cast<long>(source_mask.size()) != x_sf.rows()) {
    throw std::invalid_argument("score_spans: mask length does not match X_sf rows");
  }
  if (head.d_start.size() != x_sf.cols() || head.d_end.size() != x_sf.cols()) {
    throw std::invalid_argument("score_spans: head dimension does not match X_sf");
  }
  bool any = false;
  for (bool b : source_mask) any = any || b;
  if (!any) throw std::invalid_argument("score_spans: source mask marks no position");

  SpanDistribution dist;
  dist.source_mask = source_mask;
  masked_softmax(x_sf * head.d_start, source_mask, dist.p_start, dist.log_p_start);
  masked_softmax(x_sf * head.d_end, source_mask, dist.p_end, dist.log_p_end);
  return dist;
}

double span_loss(const SpanDistribution& dist, TokenSpan gold) {
  check_gold_index(dist, gold.first, "start");
  check_gold_index(dist, gold.last, "end");
  return -dist.log_p_start(gold.first) - dist.log_p_end(gold.last);
}

Eigen::MatrixXd span_loss_backward(const SpanDistribution& dist, TokenSpan gold,
                                   const Eigen::MatrixXd& x_sf, const SpanHead& head,
                                   SpanHead& head_grads) {
  check_gold_index(dist, gold.first, "start");
  check_gold_index(dist, gold.last, "end");
  // dL/dlogits = p - onehot(gold); exactly zero at masked positions since
  // p is zero there and the gold index is unmasked.
  Eigen::VectorXd d_start_logits = dist.p_start;
  d_start_logits(gold.first) -= 1.0;
  Eigen::VectorXd d_end_logits = dist.p_end;
  d_end_logits(gold.last) -= 1.0;

  head_grads.d_start += x_sf.transpose() * d_start_logits;
  head_grads.d_end += x_sf.transpose() * d_end_logits;
  return d_start_logits * head.d_start.transpose() +
         d_end_logits * head.d_end.transpose();
}

SpanPrediction decode(const SpanDistribution& dist, DecodeMode mode, int max_span_len) {
  const long p = dist.p_start.size();
  SpanPrediction pred;
  if (mode == DecodeMode::independent) {
    double best_start = kNegInf, best_end = kNegInf;
    for (long t = 0; t < p; ++t) {
      if (dist.log_p_start(t) > best_start) {
        best_start = dist.log_p_start(t);
        pred.start = static_cast<int>(t);
      }
      if (dist.log_p_end(t) > best_end) {
        best_end = dist.log_p_end(t);
        pred.end = static_cast<int>(t);
      }
    }
    pred.log_score = best_start + best_end;
    return pred;
  }

  if (max_span_len < 1) throw std::invalid_argument("decode: max_span_len must be >= 1");
  double best = kNegInf;
  bool found = false;
  for (long a = 0; a < p; ++a) {
    if (dist.log_p_start(a) == kNegInf) continue;
    const long b_stop = std::min(p - 1, a + max_span_len - 1);
    for (long b = a; b <= b_stop; ++b) {
      if (dist.log_p_end(b) == kNegInf) continue;
      const double score = dist.log_p_start(a) + dist.log_p_end(b);
      if (score > best) {
        best = score;
        pred.start = static_cast<int>(a);
        pred.end = static_cast<int>(b);
        found = true;
      }
    }
  }
  if (!found) {
    throw std::runtime_error("decode: no valid span within max_span_len");
  }
  pred.log_score = best;
  return pred;
}

}  // namespace spanex
