#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spanex/encoder.hpp"
#include "spanex/span_decoder.hpp"
#include "spanex/tokenizer.hpp"

namespace spanex {

// The complete trainable model: encoder weights plus the span head, with the
// vocabulary embedded so a checkpoint is self-contained for inference.
struct Model {
  EncoderConfig config;
  EncoderParams encoder;
  SpanHead span_head;
  Vocabulary vocab;
};

// Flat view over one parameter (or gradient/moment) tensor for uniform
// iteration by the optimizer, the checkpoint writer, and the grad checker.
// Vectors expose rows = size, cols = 1; matrices are column-major in memory.
struct TensorView {
  std::string name;
  double* data = nullptr;
  long rows = 0;
  long cols = 0;

  long size() const { return rows * cols; }
  double& at(long r, long c) const { return data[c * rows + r]; }
};

std::vector<TensorView> named_tensors(EncoderParams& params, SpanHead& head);
std::vector<TensorView> named_tensors(Model& model);

// Fresh model with truncated-normal weights (LayerNorm gain 1 / bias 0)
// drawn deterministically from the seed. config.vocab_size must match the
// vocabulary. A larger init_std can be used for well-conditioned gradient
// probes (keeps pre-activations away from the ReLU kink).
Model make_model(const EncoderConfig& config, const Vocabulary& vocab,
                 std::uint64_t seed, double init_std = 0.02);

// Checkpoint layout: u64 little-endian manifest length, then a JSON manifest
// (version "spanex-ckpt-1", config, vocab, tensor name/shape/dtype list),
// then each tensor's values row-major as little-endian f64 in manifest order.
inline constexpr const char* kCheckpointVersion = "spanex-ckpt-1";

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

// FNV-1a over every tensor's row-major bytes in enumeration order; used to
// audit that stage boundaries leave the weights untouched.
std::uint64_t weights_hash(const Model& model);

}  // namespace spanex
