#include "spanex/encoder.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spanex {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::MatrixXd truncated_normal(long rows, long cols, double stddev,
                                 std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Eigen::MatrixXd out(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      double x = dist(rng);
      while (std::abs(x) > 2.0 * stddev) x = dist(rng);
      out(i, j) = x;
    }
  }
  return out;
}

// Row-wise softmax in place; -inf logits come out as exactly zero.
void softmax_rows_inplace(Eigen::MatrixXd& logits) {
  for (long i = 0; i < logits.rows(); ++i) {
    double max_logit = kNegInf;
    for (long j = 0; j < logits.cols(); ++j) {
      max_logit = std::max(max_logit, logits(i, j));
    }
    if (max_logit == kNegInf) {
      throw std::invalid_argument("softmax: row " + std::to_string(i) +
                                  " has no finite logit");
    }
    double total = 0.0;
    for (long j = 0; j < logits.cols(); ++j) {
      double e = std::exp(logits(i, j) - max_logit);
      logits(i, j) = e;
      total += e;
    }
    logits.row(i) /= total;
  }
}

// Backward through a row-wise softmax: dS = A .* (dA - rowsum(dA .* A)).
Eigen::MatrixXd softmax_rows_backward(const Eigen::MatrixXd& probs,
                                      const Eigen::MatrixXd& d_probs) {
  Eigen::VectorXd dot = (d_probs.array() * probs.array()).rowwise().sum();
  return (probs.array() * (d_probs.array().colwise() - dot.array())).matrix();
}

// Backward through layer_norm_rows. Accumulates gain/bias gradients, returns
// the gradient with respect to the pre-norm input.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& d_out,
                                    const Eigen::MatrixXd& xhat,
                                    const Eigen::VectorXd& inv_std,
                                    const Eigen::VectorXd& gain,
                                    Eigen::VectorXd& d_gain,
                                    Eigen::VectorXd& d_bias) {
  d_gain += (d_out.array() * xhat.array()).colwise().sum().transpose().matrix();
  d_bias += d_out.colwise().sum().transpose();
  Eigen::MatrixXd g = d_out.array().rowwise() * gain.transpose().array();
  Eigen::VectorXd mean_g = g.rowwise().mean();
  Eigen::VectorXd mean_gx = (g.array() * xhat.array()).rowwise().mean();
  Eigen::MatrixXd dx =
      ((g.array().colwise() - mean_g.array()) -
       (xhat.array().colwise() * mean_gx.array()))
          .colwise() *
      inv_std.array();
  return dx;
}

}  // namespace

std::string_view scale_mode_name(ScaleMode mode) {
  return mode == ScaleMode::model_dim ? "model_dim" : "head_dim";
}

ScaleMode scale_mode_from_name(std::string_view name) {
  if (name == "model_dim") return ScaleMode::model_dim;
  if (name == "head_dim") return ScaleMode::head_dim;
  throw std::invalid_argument("unknown scale_mode '" + std::string(name) + "'");
}

double EncoderConfig::attention_scale() const {
  return std::sqrt(static_cast<double>(
      scale_mode == ScaleMode::model_dim ? hidden_dim : head_dim()));
}

void EncoderConfig::validate() const {
  if (num_layers < 0) throw std::invalid_argument("encoder config: num_layers must be >= 0");
  if (hidden_dim < 2) throw std::invalid_argument("encoder config: hidden_dim must be >= 2");
  if (num_heads < 1) throw std::invalid_argument("encoder config: num_heads must be >= 1");
  if (hidden_dim % num_heads != 0) {
    throw std::invalid_argument("encoder config: hidden_dim " + std::to_string(hidden_dim) +
                                " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (ffn_dim < 1) throw std::invalid_argument("encoder config: ffn_dim must be >= 1");
  if (vocab_size < 1) throw std::invalid_argument("encoder config: vocab_size must be >= 1");
  if (max_positions < 1) throw std::invalid_argument("encoder config: max_positions must be >= 1");
  if (layer_norm_eps <= 0) throw std::invalid_argument("encoder config: layer_norm_eps must be > 0");
}

EncoderParams make_encoder_params(const EncoderConfig& config) {
  config.validate();
  const int d = config.hidden_dim;
  EncoderParams params;
  params.token_embeddings = Eigen::MatrixXd::Zero(config.vocab_size, d);
  params.position_embeddings = Eigen::MatrixXd::Zero(config.max_positions, d);
  params.segment_embeddings = Eigen::MatrixXd::Zero(EncoderConfig::kNumSegments, d);
  params.layers.resize(static_cast<std::size_t>(config.num_layers));
  for (auto& layer : params.layers) {
    layer.query = Eigen::MatrixXd::Zero(d, d);
    layer.key = Eigen::MatrixXd::Zero(d, d);
    layer.value = Eigen::MatrixXd::Zero(d, d);
    layer.output = Eigen::MatrixXd::Zero(d, d);
    layer.expand = Eigen::MatrixXd::Zero(d, config.ffn_dim);
    layer.contract = Eigen::MatrixXd::Zero(config.ffn_dim, d);
    layer.ln_attn_gain = Eigen::VectorXd::Zero(d);
    layer.ln_attn_bias = Eigen::VectorXd::Zero(d);
    layer.ln_ffn_gain = Eigen::VectorXd::Zero(d);
    layer.ln_ffn_bias = Eigen::VectorXd::Zero(d);
  }
  return params;
}

void init_encoder_params(EncoderParams& params, std::mt19937_64& rng, double init_std) {
  auto fill = [&](Eigen::MatrixXd& m) {
    m = truncated_normal(m.rows(), m.cols(), init_std, rng);
  };
  fill(params.token_embeddings);
  fill(params.position_embeddings);
  fill(params.segment_embeddings);
  for (auto& layer : params.layers) {
    fill(layer.query);
    fill(layer.key);
    fill(layer.value);
    fill(layer.output);
    fill(layer.expand);
    fill(layer.contract);
    layer.ln_attn_gain.setOnes();
    layer.ln_attn_bias.setZero();
    layer.ln_ffn_gain.setOnes();
    layer.ln_ffn_bias.setZero();
  }
}

Eigen::MatrixXd embed(const ModelInput& input, const EncoderParams& params) {
  const long p = static_cast<long>(input.length());
  const long d = params.token_embeddings.cols();
  Eigen::MatrixXd x0(p, d);
  for (long t = 0; t < p; ++t) {
    const int id = input.ids[static_cast<std::size_t>(t)];
    const int pos = input.position_ids[static_cast<std::size_t>(t)];
    const int seg = input.segment_ids[static_cast<std::size_t>(t)];
    if (id < 0 || id >= params.token_embeddings.rows()) {
      throw std::out_of_range("embed: token id " + std::to_string(id) +
                              " outside vocabulary of " +
                              std::to_string(params.token_embeddings.rows()));
    }
    if (pos < 0 || pos >= params.position_embeddings.rows()) {
      throw std::out_of_range("embed: position " + std::to_string(pos) +
                              " exceeds max_positions " +
                              std::to_string(params.position_embeddings.rows()));
    }
    if (seg < 0 || seg >= params.segment_embeddings.rows()) {
      throw std::out_of_range("embed: segment id " + std::to_string(seg) + " invalid");
    }
    x0.row(t) = params.token_embeddings.row(id) +
                params.position_embeddings.row(pos) +
                params.segment_embeddings.row(seg);
  }
  return x0;
}

Eigen::MatrixXd multi_head_attention(const Eigen::MatrixXd& x,
                                     const LayerParams& layer,
                                     const EncoderConfig& config,
                                     const std::vector<bool>* key_valid,
                                     LayerCache* cache) {
  const long p = x.rows();
  const int dh = config.head_dim();
  const double scale = config.attention_scale();
  if (key_valid && static_cast<long>(key_valid->size()) != p) {
    throw std::invalid_argument("attention: key mask length does not match sequence");
  }

  Eigen::MatrixXd q = x * layer.query;
  Eigen::MatrixXd k = x * layer.key;
  Eigen::MatrixXd v = x * layer.value;

  Eigen::MatrixXd heads_concat(p, config.hidden_dim);
  std::vector<Eigen::MatrixXd> attn_weights;
  attn_weights.reserve(static_cast<std::size_t>(config.num_heads));
  for (int j = 0; j < config.num_heads; ++j) {
    auto qj = q.middleCols(j * dh, dh);
    auto kj = k.middleCols(j * dh, dh);
    auto vj = v.middleCols(j * dh, dh);
    Eigen::MatrixXd scores = qj * kj.transpose() / scale;
    if (key_valid) {
      for (long col = 0; col < p; ++col) {
        if (!(*key_valid)[static_cast<std::size_t>(col)]) {
          scores.col(col).setConstant(kNegInf);
        }
      }
    }
    softmax_rows_inplace(scores);
    heads_concat.middleCols(j * dh, dh) = scores * vj;
    attn_weights.push_back(std::move(scores));
  }

  Eigen::MatrixXd out = heads_concat * layer.output;
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn_weights = std::move(attn_weights);
    cache->heads_concat = std::move(heads_concat);
  }
  return out;
}

Eigen::MatrixXd layer_norm_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                                const Eigen::VectorXd& bias, double eps,
                                Eigen::MatrixXd* xhat_out, Eigen::VectorXd* inv_std_out) {
  Eigen::VectorXd mean = x.rowwise().mean();
  Eigen::MatrixXd centered = x.colwise() - mean;
  Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().mean()) + eps).sqrt().inverse();
  Eigen::MatrixXd xhat = centered.array().colwise() * inv_std.array();
  Eigen::MatrixXd out =
      (xhat.array().rowwise() * gain.transpose().array()).rowwise() +
      bias.transpose().array();
  if (xhat_out) *xhat_out = std::move(xhat);
  if (inv_std_out) *inv_std_out = std::move(inv_std);
  return out;
}

Eigen::MatrixXd transformer_layer(const Eigen::MatrixXd& x, const LayerParams& layer,
                                  const EncoderConfig& config,
                                  const std::vector<bool>* key_valid,
                                  LayerCache* cache) {
  Eigen::MatrixXd attn_out = multi_head_attention(x, layer, config, key_valid, cache);
  Eigen::MatrixXd r1 = attn_out + x;
  Eigen::MatrixXd h = layer_norm_rows(r1, layer.ln_attn_gain, layer.ln_attn_bias,
                                      config.layer_norm_eps,
                                      cache ? &cache->ln_attn_xhat : nullptr,
                                      cache ? &cache->ln_attn_inv_std : nullptr);
  Eigen::MatrixXd ffn_pre = h * layer.expand;
  Eigen::MatrixXd r2 = ffn_pre.cwiseMax(0.0) * layer.contract + h;
  Eigen::MatrixXd out = layer_norm_rows(r2, layer.ln_ffn_gain, layer.ln_ffn_bias,
                                        config.layer_norm_eps,
                                        cache ? &cache->ln_ffn_xhat : nullptr,
                                        cache ? &cache->ln_ffn_inv_std : nullptr);
  if (cache) {
    cache->x_in = x;
    cache->h = std::move(h);
    cache->ffn_pre = std::move(ffn_pre);
  }
  return out;
}

Eigen::MatrixXd encoder_forward(const ModelInput& input, const EncoderParams& params,
                                const EncoderConfig& config, ActivationCache* cache,
                                const std::vector<bool>* key_valid) {
  config.validate();
  if (static_cast<int>(params.layers.size()) != config.num_layers) {
    throw std::invalid_argument("encoder_forward: params carry " +
                                std::to_string(params.layers.size()) +
                                " layers, config expects " +
                                std::to_string(config.num_layers));
  }
  Eigen::MatrixXd x = embed(input, params);
  if (cache) {
    cache->valid = false;
    cache->x0 = x;
    cache->layers.assign(params.layers.size(), LayerCache{});
    cache->token_ids = input.ids;
    cache->position_ids = input.position_ids;
    cache->segment_ids = input.segment_ids;
    cache->key_valid = key_valid ? *key_valid : std::vector<bool>{};
  }
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    x = transformer_layer(x, params.layers[i], config, key_valid,
                          cache ? &cache->layers[i] : nullptr);
  }
  if (cache) cache->valid = true;
  return x;
}

void encoder_backward(const Eigen::MatrixXd& d_xsf, const ActivationCache& cache,
                      const EncoderParams& params, const EncoderConfig& config,
                      EncoderParams& grads) {
  if (!cache.valid) {
    throw std::logic_error("encoder_backward: no cached forward pass");
  }
  const int dh = config.head_dim();
  const double scale = config.attention_scale();

  Eigen::MatrixXd dx = d_xsf;
  for (int i = static_cast<int>(params.layers.size()) - 1; i >= 0; --i) {
    const LayerParams& layer = params.layers[static_cast<std::size_t>(i)];
    const LayerCache& c = cache.layers[static_cast<std::size_t>(i)];
    LayerParams& g = grads.layers[static_cast<std::size_t>(i)];

    // Second LayerNorm, then the FFN with its residual.
    Eigen::MatrixXd d_r2 = layer_norm_backward(dx, c.ln_ffn_xhat, c.ln_ffn_inv_std,
                                               layer.ln_ffn_gain, g.ln_ffn_gain,
                                               g.ln_ffn_bias);
    Eigen::MatrixXd relu_out = c.ffn_pre.cwiseMax(0.0);
    g.contract += relu_out.transpose() * d_r2;
    Eigen::MatrixXd d_ffn_pre =
        ((d_r2 * layer.contract.transpose()).array() *
         (c.ffn_pre.array() > 0.0).cast<double>())
            .matrix();
    g.expand += c.h.transpose() * d_ffn_pre;
    Eigen::MatrixXd dh_total = d_r2 + d_ffn_pre * layer.expand.transpose();

    // First LayerNorm, then attention with its residual.
    Eigen::MatrixXd d_r1 = layer_norm_backward(dh_total, c.ln_attn_xhat,
                                               c.ln_attn_inv_std, layer.ln_attn_gain,
                                               g.ln_attn_gain, g.ln_attn_bias);
    g.output += c.heads_concat.transpose() * d_r1;
    Eigen::MatrixXd d_hc = d_r1 * layer.output.transpose();

    Eigen::MatrixXd dx_in = d_r1;  // residual branch
    for (int j = 0; j < config.num_heads; ++j) {
      auto qj = c.q.middleCols(j * dh, dh);
      auto kj = c.k.middleCols(j * dh, dh);
      auto vj = c.v.middleCols(j * dh, dh);
      const Eigen::MatrixXd& aj = c.attn_weights[static_cast<std::size_t>(j)];
      auto d_hj = d_hc.middleCols(j * dh, dh);

      Eigen::MatrixXd d_aj = d_hj * vj.transpose();
      Eigen::MatrixXd d_vj = aj.transpose() * d_hj;
      Eigen::MatrixXd d_sj = softmax_rows_backward(aj, d_aj);
      Eigen::MatrixXd d_qj = d_sj * kj / scale;
      Eigen::MatrixXd d_kj = d_sj.transpose() * qj / scale;

      g.query.middleCols(j * dh, dh) += c.x_in.transpose() * d_qj;
      g.key.middleCols(j * dh, dh) += c.x_in.transpose() * d_kj;
      g.value.middleCols(j * dh, dh) += c.x_in.transpose() * d_vj;
      dx_in += d_qj * layer.query.middleCols(j * dh, dh).transpose();
      dx_in += d_kj * layer.key.middleCols(j * dh, dh).transpose();
      dx_in += d_vj * layer.value.middleCols(j * dh, dh).transpose();
    }
    dx = std::move(dx_in);
  }

  for (long t = 0; t < dx.rows(); ++t) {
    const auto idx = static_cast<std::size_t>(t);
    grads.token_embeddings.row(cache.token_ids[idx]) += dx.row(t);
    grads.position_embeddings.row(cache.position_ids[idx]) += dx.row(t);
    grads.segment_embeddings.row(cache.segment_ids[idx]) += dx.row(t);
  }
}

Eigen::VectorXd softmax_row(const Eigen::VectorXd& logits) {
  Eigen::MatrixXd row = logits.transpose();
  softmax_rows_inplace(row);
  return row.transpose();
}

}  // namespace spanex
