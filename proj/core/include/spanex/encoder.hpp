#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spanex/tokenizer.hpp"

namespace spanex {

// Divisor applied to attention logits before the softmax: the full model
// dimension sqrt(d), or the per-head dimension sqrt(d/k).
enum class ScaleMode { model_dim, head_dim };

std::string_view scale_mode_name(ScaleMode mode);
ScaleMode scale_mode_from_name(std::string_view name);

struct EncoderConfig {
  int num_layers = 2;
  int hidden_dim = 32;
  int num_heads = 2;
  int ffn_dim = 64;
  int vocab_size = 0;
  int max_positions = 128;
  ScaleMode scale_mode = ScaleMode::model_dim;
  double layer_norm_eps = 1e-12;

  static constexpr int kNumSegments = 2;

  int head_dim() const { return hidden_dim / num_heads; }
  double attention_scale() const;

  // Throws std::invalid_argument when a field is out of range (e.g. hidden_dim
  // not divisible by num_heads, or vocab_size/max_positions unset).
  void validate() const;
};

struct LayerParams {
  // Attention projections store all heads side by side: columns
  // [j*head_dim, (j+1)*head_dim) of query/key/value belong to head j.
  Eigen::MatrixXd query;   // d x d
  Eigen::MatrixXd key;     // d x d
  Eigen::MatrixXd value;   // d x d
  Eigen::MatrixXd output;  // d x d
  Eigen::MatrixXd expand;    // d x f
  Eigen::MatrixXd contract;  // f x d
  Eigen::VectorXd ln_attn_gain;  // d
  Eigen::VectorXd ln_attn_bias;  // d
  Eigen::VectorXd ln_ffn_gain;   // d
  Eigen::VectorXd ln_ffn_bias;   // d
};

struct EncoderParams {
  Eigen::MatrixXd token_embeddings;     // V x d
  Eigen::MatrixXd position_embeddings;  // P x d
  Eigen::MatrixXd segment_embeddings;   // 2 x d
  std::vector<LayerParams> layers;
};

// All-zero parameter set with the shapes the config dictates; also the shape
// template for gradient and optimizer-moment accumulators.
EncoderParams make_encoder_params(const EncoderConfig& config);

// Truncated normal init (std 0.02, redrawn beyond two standard deviations) for
// embeddings and projections; LayerNorm gains 1, biases 0.
void init_encoder_params(EncoderParams& params, std::mt19937_64& rng,
                         double init_std = 0.02);

// Forward-pass byproducts one layer needs for its backward pass.
struct LayerCache {
  Eigen::MatrixXd x_in;                       // p x d
  Eigen::MatrixXd q, k, v;                    // p x d
  std::vector<Eigen::MatrixXd> attn_weights;  // per head, p x p
  Eigen::MatrixXd heads_concat;               // p x d, before the output projection
  Eigen::MatrixXd ln_attn_xhat;               // p x d
  Eigen::VectorXd ln_attn_inv_std;            // p
  Eigen::MatrixXd h;                          // p x d, after the first LayerNorm
  Eigen::MatrixXd ffn_pre;                    // p x f, before the ReLU
  Eigen::MatrixXd ln_ffn_xhat;                // p x d
  Eigen::VectorXd ln_ffn_inv_std;             // p
};

struct ActivationCache {
  bool valid = false;
  Eigen::MatrixXd x0;
  std::vector<LayerCache> layers;
  std::vector<int> token_ids;
  std::vector<int> position_ids;
  std::vector<int> segment_ids;
  std::vector<bool> key_valid;  // empty means every key position is live
};

// X_0[t] = token_emb[id_t] + position_emb[pos_t] + segment_emb[seg_t].
// Throws std::out_of_range when an id exceeds its table.
Eigen::MatrixXd embed(const ModelInput& input, const EncoderParams& params);

// One multi-head self-attention block (no residual, no norm). key_valid, when
// given, marks which key positions may receive attention; logits to dead keys
// go to -inf, so their weight is exactly zero.
Eigen::MatrixXd multi_head_attention(const Eigen::MatrixXd& x,
                                     const LayerParams& layer,
                                     const EncoderConfig& config,
                                     const std::vector<bool>* key_valid = nullptr,
                                     LayerCache* cache = nullptr);

// H = LayerNorm(attention(X) + X); X' = LayerNorm(relu(H U) V + H).
Eigen::MatrixXd transformer_layer(const Eigen::MatrixXd& x,
                                  const LayerParams& layer,
                                  const EncoderConfig& config,
                                  const std::vector<bool>* key_valid = nullptr,
                                  LayerCache* cache = nullptr);

// Full encoder: embed then num_layers transformer layers. Pass a cache to
// retain what encoder_backward needs.
Eigen::MatrixXd encoder_forward(const ModelInput& input,
                                const EncoderParams& params,
                                const EncoderConfig& config,
                                ActivationCache* cache = nullptr,
                                const std::vector<bool>* key_valid = nullptr);

// Reverse-mode gradients for every encoder parameter, accumulated (+=) into
// grads, which must already have the right shapes (make_encoder_params).
// d_xsf is dLoss/dX_sf. Throws std::logic_error without a valid cache.
void encoder_backward(const Eigen::MatrixXd& d_xsf, const ActivationCache& cache,
                      const EncoderParams& params, const EncoderConfig& config,
                      EncoderParams& grads);

// Row-wise softmax and LayerNorm, shared by the decoder and tests.
Eigen::VectorXd softmax_row(const Eigen::VectorXd& logits);
Eigen::MatrixXd layer_norm_rows(const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& gain,
                                const Eigen::VectorXd& bias, double eps,
                                Eigen::MatrixXd* xhat_out = nullptr,
                                Eigen::VectorXd* inv_std_out = nullptr);

}  // namespace spanex
