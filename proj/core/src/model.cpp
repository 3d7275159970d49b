#include "spanex/model.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace spanex {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void add_view(std::vector<TensorView>& out, std::string name, Eigen::MatrixXd& m) {
  out.push_back({std::move(name), m.data(), m.rows(), m.cols()});
}

void add_view(std::vector<TensorView>& out, std::string name, Eigen::VectorXd& v) {
  out.push_back({std::move(name), v.data(), v.size(), 1});
}

nlohmann::json config_to_json(const EncoderConfig& config) {
  return {{"num_layers", config.num_layers},
          {"hidden_dim", config.hidden_dim},
          {"num_heads", config.num_heads},
          {"ffn_dim", config.ffn_dim},
          {"vocab_size", config.vocab_size},
          {"max_positions", config.max_positions},
          {"scale_mode", std::string(scale_mode_name(config.scale_mode))},
          {"layer_norm_eps", config.layer_norm_eps}};
}

EncoderConfig config_from_json(const nlohmann::json& j) {
  EncoderConfig config;
  config.num_layers = j.at("num_layers").get<int>();
  config.hidden_dim = j.at("hidden_dim").get<int>();
  config.num_heads = j.at("num_heads").get<int>();
  config.ffn_dim = j.at("ffn_dim").get<int>();
  config.vocab_size = j.at("vocab_size").get<int>();
  config.max_positions = j.at("max_positions").get<int>();
  config.scale_mode = scale_mode_from_name(j.at("scale_mode").get<std::string>());
  config.layer_norm_eps = j.value("layer_norm_eps", 1e-12);
  config.validate();
  return config;
}

void append_row_major(std::string& blob, const TensorView& view) {
  for (long r = 0; r < view.rows; ++r) {
    for (long c = 0; c < view.cols; ++c) {
      char bytes[sizeof(double)];
      std::memcpy(bytes, &view.at(r, c), sizeof(double));
      blob.append(bytes, sizeof(double));
    }
  }
}

}  // namespace

std::vector<TensorView> named_tensors(EncoderParams& params, SpanHead& head) {
  std::vector<TensorView> out;
  add_view(out, "embeddings.token", params.token_embeddings);
  add_view(out, "embeddings.position", params.position_embeddings);
  add_view(out, "embeddings.segment", params.segment_embeddings);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const std::string prefix = "layers." + std::to_string(i) + ".";
    LayerParams& layer = params.layers[i];
    add_view(out, prefix + "attn.query", layer.query);
    add_view(out, prefix + "attn.key", layer.key);
    add_view(out, prefix + "attn.value", layer.value);
    add_view(out, prefix + "attn.output", layer.output);
    add_view(out, prefix + "ln_attn.gain", layer.ln_attn_gain);
    add_view(out, prefix + "ln_attn.bias", layer.ln_attn_bias);
    add_view(out, prefix + "ffn.expand", layer.expand);
    add_view(out, prefix + "ffn.contract", layer.contract);
    add_view(out, prefix + "ln_ffn.gain", layer.ln_ffn_gain);
    add_view(out, prefix + "ln_ffn.bias", layer.ln_ffn_bias);
  }
  add_view(out, "span_head.start", head.d_start);
  add_view(out, "span_head.end", head.d_end);
  return out;
}

std::vector<TensorView> named_tensors(Model& model) {
  return named_tensors(model.encoder, model.span_head);
}

Model make_model(const EncoderConfig& config, const Vocabulary& vocab,
                 std::uint64_t seed, double init_std) {
  config.validate();
  if (config.vocab_size != static_cast<int>(vocab.size())) {
    throw std::invalid_argument("make_model: config.vocab_size " +
                                std::to_string(config.vocab_size) +
                                " does not match vocabulary size " +
                                std::to_string(vocab.size()));
  }
  Model model{config, make_encoder_params(config), make_span_head(config.hidden_dim),
              vocab};
  std::mt19937_64 rng(seed);
  init_encoder_params(model.encoder, rng, init_std);
  std::normal_distribution<double> dist(0.0, init_std);
  auto draw = [&] {
    double x = dist(rng);
    while (std::abs(x) > 2.0 * init_std) x = dist(rng);
    return x;
  };
  for (long i = 0; i < model.span_head.d_start.size(); ++i) model.span_head.d_start(i) = draw();
  for (long i = 0; i < model.span_head.d_end.size(); ++i) model.span_head.d_end(i) = draw();
  return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
  auto views = named_tensors(const_cast<Model&>(model));

  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["config"] = config_to_json(model.config);
  manifest["vocab"] = model.vocab.tokens();
  auto& tensors = manifest["tensors"] = nlohmann::json::array();
  for (const auto& view : views) {
    tensors.push_back({{"name", view.name},
                       {"shape", {view.rows, view.cols}},
                       {"dtype", "f64"}});
  }
  const std::string manifest_text = manifest.dump();

  std::string payload;
  const std::uint64_t manifest_len = manifest_text.size();
  char header[sizeof(manifest_len)];
  std::memcpy(header, &manifest_len, sizeof(manifest_len));
  payload.append(header, sizeof(manifest_len));
  payload += manifest_text;
  for (const auto& view : views) append_row_major(payload, view);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");

  std::uint64_t manifest_len = 0;
  in.read(reinterpret_cast<char*>(&manifest_len), sizeof(manifest_len));
  if (!in) throw std::runtime_error("checkpoint '" + path + "' truncated in header");
  std::string manifest_text(manifest_len, '\0');
  in.read(manifest_text.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) throw std::runtime_error("checkpoint '" + path + "' truncated in manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint '" + path + "': bad manifest: " + e.what());
  }
  const auto version = manifest.at("version").get<std::string>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint '" + path + "': unsupported version '" +
                             version + "'");
  }

  EncoderConfig config = config_from_json(manifest.at("config"));
  Vocabulary vocab =
      Vocabulary::from_tokens(manifest.at("vocab").get<std::vector<std::string>>());
  if (config.vocab_size != static_cast<int>(vocab.size())) {
    throw std::runtime_error("checkpoint '" + path + "': vocab size mismatch");
  }

  Model model{config, make_encoder_params(config), make_span_head(config.hidden_dim),
              vocab};
  auto views = named_tensors(model);

  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != views.size()) {
    throw std::runtime_error("checkpoint '" + path + "': expected " +
                             std::to_string(views.size()) + " tensors, found " +
                             std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& entry = tensors[i];
    const auto name = entry.at("name").get<std::string>();
    if (name != views[i].name) {
      throw std::runtime_error("checkpoint '" + path + "': tensor " +
                               std::to_string(i) + " is '" + name + "', expected '" +
                               views[i].name + "'");
    }
    if (entry.at("dtype").get<std::string>() != "f64") {
      throw std::runtime_error("checkpoint '" + path + "': tensor '" + name +
                               "' has unsupported dtype");
    }
    const auto shape = entry.at("shape").get<std::vector<long>>();
    if (shape.size() != 2 || shape[0] != views[i].rows || shape[1] != views[i].cols) {
      throw std::runtime_error("checkpoint '" + path + "': tensor '" + name +
                               "' shape mismatch");
    }
    for (long r = 0; r < views[i].rows; ++r) {
      for (long c = 0; c < views[i].cols; ++c) {
        double value = 0.0;
        in.read(reinterpret_cast<char*>(&value), sizeof(value));
        if (!in) {
          throw std::runtime_error("checkpoint '" + path + "': truncated in tensor '" +
                                   name + "'");
        }
        views[i].at(r, c) = value;
      }
    }
  }
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw std::runtime_error("checkpoint '" + path + "': trailing bytes after tensors");
  }
  return model;
}

std::uint64_t weights_hash(const Model& model) {
  auto views = named_tensors(const_cast<Model&>(model));
  std::uint64_t hash = 1469598103934665603ull;  // FNV-1a offset basis
  auto mix = [&hash](const char* bytes, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= static_cast<unsigned char>(bytes[i]);
      hash *= 1099511628211ull;
    }
  };
  for (const auto& view : views) {
    for (long r = 0; r < view.rows; ++r) {
      for (long c = 0; c < view.cols; ++c) {
        char bytes[sizeof(double)];
        std::memcpy(bytes, &view.at(r, c), sizeof(double));
        mix(bytes, sizeof(double));
      }
    }
  }
  return hash;
}

}  // namespace spanex
