#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "motionbeat/autodiff.hpp"
#include "motionbeat/beat_grid.hpp"
#include "motionbeat/tensor.hpp"

namespace motionbeat {

struct EncoderConfig {
  int num_layers = 6;
  int hidden_dim = 512;
  int num_heads = 8;
  int embed_dim = 128;
  int input_dim = 128;
  int bar_len = 4;
  int ff_mult = 2;
  bool contact_guided = false;  // motion encoder: contact-biased attention
  bool phase_features = false;  // append sqrt(input_dim) * (cos phi, sin phi) to every standardized token
  double alpha_logit_init = 0.5;
  double alpha_val_init = 0.5;

  int head_dim() const { return hidden_dim / num_heads; }
  int token_width() const { return input_dim + (phase_features ? 2 : 0); }
  void validate() const;
};

// Full-size encoder (6 layers, 512 hidden, 8 heads, 128-d embeddings).
EncoderConfig full_encoder_config(int input_dim, int bar_len, bool contact_guided);
// Desk-scale default: 2 layers, 64 hidden, 4 heads, 32-d embeddings.
EncoderConfig tiny_encoder_config(int input_dim, int bar_len, bool contact_guided);

struct NamedTensor {
  std::string name;
  Matrix value;
  bool trainable = true;
};

// Flat, ordered tensor list of one encoder stack. The order is fixed by
// encoder_layout() and is the checkpoint serialization order.
struct ModelParams {
  std::vector<NamedTensor> tensors;

  int index_of(std::string_view name) const;
  const Matrix& get(std::string_view name) const { return tensors[static_cast<std::size_t>(index_of(name))].value; }
  Matrix& get(std::string_view name) { return tensors[static_cast<std::size_t>(index_of(name))].value; }
  std::size_t num_values() const;
};

struct TensorSpec {
  std::string name;
  int rows, cols;
  bool trainable;
};

std::vector<TensorSpec> encoder_layout(const EncoderConfig& cfg);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit gains,
// contact gains at softplus^-1(init).
ModelParams init_encoder_params(const EncoderConfig& cfg, std::uint64_t seed);

double softplus_value(double x);
double inverse_softplus(double y);

// Learnable contact gains of layer `layer` after the softplus map.
double alpha_logit(const ModelParams& p, int layer);
double alpha_val(const ModelParams& p, int layer);

// Phase of every beat relative to the clip's downbeats.
std::vector<double> beat_phases(const BeatGrid& grid);

struct BoundParams {
  std::vector<ad::Var> vars;  // aligned with ModelParams::tensors
};

BoundParams bind_params(ad::Graph& graph, const ModelParams& params, bool requires_grad);

struct EncoderGraph {
  ad::Var hidden;     // K x hidden_dim after the final layer norm
  ad::Var embedding;  // 1 x d, unit norm
  ad::Var onset;      // K x 1, softplus
  ad::Var contact;    // K x 1, sigmoid
};

// Records one encoder pass on `graph`. `contacts` feeds contact-guided
// attention; when the encoder is contact-guided and contacts is null, a
// contact-free pass predicts them first.
EncoderGraph encode(ad::Graph& graph, const BoundParams& bound, const ModelParams& params, const EncoderConfig& cfg,
                    const Matrix& tokens, const BeatGrid& grid, const std::vector<double>* contacts);

struct EncoderResult {
  Matrix hidden;
  RowVector embedding;
  std::vector<double> onset;
  std::vector<double> contact;
};

EncoderResult encoder_forward(const Matrix& tokens, const BeatGrid& grid, const std::vector<double>* contacts,
                              const ModelParams& params, const EncoderConfig& cfg);

// Audio and motion encoders.
struct MotionBeatModel {
  EncoderConfig audio_config;
  EncoderConfig motion_config;
  ModelParams audio;
  ModelParams motion;
};

MotionBeatModel init_model(const EncoderConfig& audio_cfg, const EncoderConfig& motion_cfg, std::uint64_t seed);

struct EmbeddingPair {
  RowVector z_a;
  RowVector z_m;
};

}  // namespace motionbeat
