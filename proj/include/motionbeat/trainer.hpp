#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "motionbeat/config.hpp"
#include "motionbeat/dataset.hpp"
#include "motionbeat/encoder.hpp"
#include "motionbeat/metrics.hpp"

namespace motionbeat {

struct ModelGrads {
  std::vector<Matrix> audio;   // aligned with MotionBeatModel::audio.tensors
  std::vector<Matrix> motion;
};

// One mini-batch with its negatives mined against the model at planning time.
struct BatchPlan {
  std::vector<int> clips;              // dataset indices
  std::vector<NegativeSet> negatives;  // one per clip
};

struct BatchLoss {
  double total = 0.0;  // ecl + alpha * sral + aux_weight * aux
  double ecl = 0.0;
  double sral = 0.0;   // batch mean
  double aux = 0.0;    // batch mean of onset MSE + contact BCE
  ModelGrads grads;    // filled when requested
};

// Model with the configured encoders sized to the dataset and input
// standardization statistics taken from the training clips.
MotionBeatModel initial_model(const RunConfig& config, const Dataset& data, std::span<const int> train);

// Tempo negatives come from `pool` (dataset indices), excluding the anchor.
BatchPlan plan_batch(const MotionBeatModel& model, const Dataset& data, std::vector<int> clips,
                     std::span<const int> pool, const RunConfig& config, std::uint64_t seed);

BatchLoss batch_loss(const MotionBeatModel& model, const Dataset& data, const BatchPlan& plan,
                     const RunConfig& config, bool with_grads);

struct Embeddings {
  Matrix audio;   // N x d
  Matrix motion;  // N x d
};

// Motion clips use their annotated contact pulse when present.
Embeddings embed_clips(const MotionBeatModel& model, const Dataset& data, std::span<const int> indices);

// Fraction of clips whose true pair has a higher cosine than both of its
// +-1 beat shifted motion variants.
double jitter_discrimination(const MotionBeatModel& model, const Dataset& data, std::span<const int> indices);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double ecl = 0.0;
  double sral = 0.0;
  double val_r_at_1 = 0.0;
};

std::string epoch_json(const EpochRecord& r);

struct TrainResult {
  MotionBeatModel model;  // parameters of the best validation epoch
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_val_r_at_1 = -1.0;
};

// Seeded mini-batch AdamW training with validation R@1 (music to motion)
// early stopping. `on_epoch` sees each record as it is produced.
TrainResult train(const RunConfig& config, const Dataset& data, const DatasetSplit& split,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Reads config.dataset, trains, writes checkpoint.bin and metrics.jsonl into
// config.output_dir.
TrainResult train_from_files(const RunConfig& config, std::ostream* progress = nullptr);

struct GradCheckReport {
  double max_rel_error = 0.0;
  int checked = 0;
  std::string worst_param;
};

// Central differences of the total batch loss on `samples` randomly chosen
// trainable scalars, negatives held fixed. Error per scalar is
// |g_ad - g_fd| / (|g_ad| + |g_fd| + 1e-8).
GradCheckReport grad_check_model(const MotionBeatModel& model, const Dataset& data, const BatchPlan& plan,
                                 const RunConfig& config, double h = 1e-4, int samples = 200,
                                 std::uint64_t seed = 0);

}  // namespace motionbeat
