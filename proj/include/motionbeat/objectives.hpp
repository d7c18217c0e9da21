#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "motionbeat/align.hpp"
#include "motionbeat/dataset.hpp"
#include "motionbeat/encoder.hpp"

namespace motionbeat {

struct LossWeights {
  double tau = 0.07;
  double lambda_beat = 0.9;
  double lambda_bar = 0.2;
  double alpha = 0.2;

  void validate() const;
};

// Negatives of one anchor. Batch negatives index rows of the positive matrix;
// tempo and jitter negatives are motion embeddings held constant.
struct NegativeSet {
  std::vector<int> batch;
  std::vector<int> tempo_indices;  // pool positions the tempo rows came from
  Matrix tempo;                    // n_tempo x d
  Matrix jitter;                   // n_jitter x d
};

struct TempoMining {
  std::vector<int> indices;  // positions in the pool
  int shortfall = 0;         // requested - returned
};

// Clips within bpm_tol relative tempo of the anchor whose phase offset or
// accent pattern differs; a seeded shuffle picks up to `count` of them.
// Pool entries with the anchor's index are never returned.
TempoMining mine_tempo_negatives(const ClipMeta& anchor, std::span<const ClipMeta> pool, int count, double bpm_tol,
                                 std::uint64_t seed);

// Encodes the anchor motion shifted by +1 and -1 beat (rows in that order).
Matrix make_beat_jitter_negatives(const TokenSequence& anchor_motion, const MotionBeatModel& model);

struct EclResult {
  double value = 0.0;
  std::vector<double> per_anchor;
  Matrix grad_anchors;    // N x d
  Matrix grad_positives;  // N x d
};

// -1/N sum_i log(exp(s_ii / tau) / D_i), D_i summing the positive and every
// negative category. With `symmetric` the motion-to-audio direction (in-batch
// negatives) is averaged in.
EclResult ecl_loss(const Matrix& anchors, const Matrix& positives, std::span<const NegativeSet> negatives, double tau,
                   bool symmetric = false);

// Negative sets with all other batch rows and no extra categories.
std::vector<NegativeSet> in_batch_negatives(int n);

struct SralResult {
  double value = 0.0;
  double beat_term = 0.0;  // soft_dtw(onset, contact)
  double bar_term = 0.0;   // mean over bars of emd(accent, energy)
  std::vector<double> grad_onset;
  std::vector<double> grad_contact;
  std::vector<std::vector<double>> grad_accent_mass;
  std::vector<std::vector<double>> grad_energy_mass;
};

SralResult sral_loss(std::span<const double> onset, std::span<const double> contact,
                     const std::vector<std::vector<double>>& accent_mass,
                     const std::vector<std::vector<double>>& energy_mass, const LossWeights& weights,
                     const SoftDtwConfig& dtw = {});

// SRAL on rhythm-head outputs: accent and energy masses are the per-bar
// normalizations of the predicted onset and contact sequences. Gradients are
// chained through the normalization back to the predictions.
SralResult sral_from_predictions(std::span<const double> onset_pred, std::span<const double> contact_pred,
                                 const BeatGrid& grid, const LossWeights& weights, const SoftDtwConfig& dtw = {});

// SRAL on a clip's annotations.
SralResult sral_from_annotations(const Clip& clip, const LossWeights& weights, const SoftDtwConfig& dtw = {});

double total_loss(double ecl_value, double sral_value, double alpha);

struct ScalarLoss {
  double value = 0.0;
  std::vector<double> grad;
};

ScalarLoss mean_squared_error(std::span<const double> pred, std::span<const double> target);
// Predictions are clamped to [1e-7, 1 - 1e-7].
ScalarLoss binary_cross_entropy(std::span<const double> pred, std::span<const double> target);

}  // namespace motionbeat
