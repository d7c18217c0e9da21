#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "motionbeat/encoder.hpp"
#include "motionbeat/objectives.hpp"
#include "motionbeat/optimizer.hpp"
#include "motionbeat/synthetic.hpp"

namespace motionbeat {

enum class SralSource { pred, gt };

const char* to_string(SralSource s);

struct NegativeSettings {
  int tempo_count = 4;         // tempo-aware negatives per anchor
  double bpm_tolerance = 0.05; // relative
  bool beat_jitter = true;     // +-1 beat shifted anchor motion
  bool jitter_gradient = false;  // backpropagate through jitter negatives
};

// Encoder hyperparameters; input_dim and bar_len are taken from the data.
struct EncoderSettings {
  int num_layers = 6;
  int hidden_dim = 512;
  int num_heads = 8;
  int embed_dim = 128;
  int ff_mult = 2;
  bool phase_features = false;
  double alpha_logit_init = 0.5;
  double alpha_val_init = 0.5;

  EncoderConfig resolve(int input_dim, int bar_len, bool contact_guided) const;
};

struct RunConfig {
  EncoderSettings audio_encoder;
  EncoderSettings motion_encoder;
  bool contact_guided = true;
  LossWeights loss;
  double soft_dtw_gamma = 0.1;
  double aux_weight = 0.1;   // onset MSE + contact BCE on the rhythm heads
  bool symmetric_ecl = false;
  NegativeSettings negatives;
  AdamWSettings optimizer;
  int batch_size = 64;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::string dataset;      // JSONL dataset file, split 80/10/10
  std::string output_dir;   // checkpoint.bin and metrics.jsonl
  SralSource sral_source = SralSource::pred;

  void validate() const;
};

// Desk-scale preset: 2 layers, hidden 64, 4 heads, d = 32, batch 16, bar-phase
// input features on, learning rate 1e-3, 30 epochs.
RunConfig tiny_run_config();

// JSON run configs. Every key is optional; unknown keys throw ConfigError.
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);
// Reads a config file and applies MOTIONBEAT_SEED when set.
RunConfig load_run_config(const std::filesystem::path& path);
void apply_seed_env(RunConfig& config);

// Synthetic dataset spec for gen-data. Keys: seed, bpm_min, bpm_max, bar_len,
// num_beats, accent_pattern, accent_palette, rotate_patterns, accent_perturb,
// num_styles, contact_lag_std, feature_noise_std, num_joints, motion_fps,
// sample_rate, n_mels. Unknown keys throw ConfigError.
DatasetSpec dataset_spec_from_json(const std::string& text);
DatasetSpec load_dataset_spec(const std::filesystem::path& path);

}  // namespace motionbeat
