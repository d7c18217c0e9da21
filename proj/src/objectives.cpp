#include "motionbeat/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "motionbeat/errors.hpp"
#include "motionbeat/rng.hpp"

namespace motionbeat {

void LossWeights::validate() const {
  if (!(tau > 0.0)) throw DomainError("tau must be > 0");
  if (!(lambda_beat >= 0.0) || !(lambda_bar >= 0.0) || !(alpha >= 0.0)) throw DomainError("loss weights must be >= 0");
}

TempoMining mine_tempo_negatives(const ClipMeta& anchor, std::span<const ClipMeta> pool, int count, double bpm_tol,
                                 std::uint64_t seed) {
  if (!(bpm_tol >= 0.0)) throw DomainError("bpm tolerance must be >= 0");
  std::vector<int> candidates;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const ClipMeta& c = pool[i];
    if (c.index == anchor.index) continue;
    if (std::abs(c.bpm - anchor.bpm) > bpm_tol * anchor.bpm) continue;
    bool differs = c.phase_offset != anchor.phase_offset || c.accent_pattern.size() != anchor.accent_pattern.size();
    for (std::size_t b = 0; !differs && b < c.accent_pattern.size(); ++b) {
      differs = std::abs(c.accent_pattern[b] - anchor.accent_pattern[b]) > 1e-9;
    }
    if (differs) candidates.push_back(static_cast<int>(i));
  }
  Rng rng(mix64(seed ^ (static_cast<std::uint64_t>(anchor.index) * 0x9e3779b97f4a7c15ULL)));
  rng.shuffle(candidates);
  TempoMining out;
  const int take = std::min(std::max(count, 0), static_cast<int>(candidates.size()));
  out.indices.assign(candidates.begin(), candidates.begin() + take);
  std::sort(out.indices.begin(), out.indices.end());
  out.shortfall = std::max(count, 0) - take;
  return out;
}

Matrix make_beat_jitter_negatives(const TokenSequence& anchor_motion, const MotionBeatModel& model) {
  if (anchor_motion.num_beats() < 2) throw DomainError("beat-jitter negatives need at least 2 beats");
  Matrix out(2, model.motion_config.embed_dim);
  int row = 0;
  for (int delta : {+1, -1}) {
    const TokenSequence shifted = beat_shift(anchor_motion, delta);
    const auto* r = shifted.annotation.contact_pulse.empty() ? nullptr : &shifted.annotation.contact_pulse;
    out.row(row++) = encoder_forward(shifted.tokens, shifted.grid, r, model.motion, model.motion_config).embedding;
  }
  return out;
}

namespace {

void check_unit(const Matrix& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (std::abs(m.row(r).norm() - 1.0) > 1e-3) {
      throw DomainError(std::string("ecl_loss: ") + what + " row " + std::to_string(r) + " is not unit norm");
    }
  }
}

// Cross-entropy of logits with target index 0; returns value and writes softmax into probs.
double softmax_xent(const std::vector<double>& logits, std::vector<double>& probs) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - m);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return -(logits[0] - m - std::log(sum));
}

}  // namespace

std::vector<NegativeSet> in_batch_negatives(int n) {
  std::vector<NegativeSet> sets(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j != i) sets[static_cast<std::size_t>(i)].batch.push_back(j);
    }
  }
  return sets;
}

EclResult ecl_loss(const Matrix& anchors, const Matrix& positives, std::span<const NegativeSet> negatives, double tau,
                   bool symmetric) {
  if (!(tau > 0.0)) throw DomainError("ecl_loss: tau must be > 0");
  if (anchors.rows() != positives.rows() || anchors.cols() != positives.cols()) {
    throw ShapeError("ecl_loss: anchors and positives must have the same shape");
  }
  const Eigen::Index N = anchors.rows();
  if (N < 1) throw DomainError("ecl_loss: empty batch");
  if (negatives.size() != static_cast<std::size_t>(N)) throw ShapeError("ecl_loss: one negative set per anchor");
  check_unit(anchors, "anchor");
  check_unit(positives, "positive");

  EclResult out;
  out.grad_anchors = Matrix::Zero(N, anchors.cols());
  out.grad_positives = Matrix::Zero(N, anchors.cols());
  out.per_anchor.assign(static_cast<std::size_t>(N), 0.0);
  const double dir_weight = symmetric ? 0.5 : 1.0;

  std::vector<double> logits, probs;
  for (Eigen::Index i = 0; i < N; ++i) {
    const NegativeSet& neg = negatives[static_cast<std::size_t>(i)];
    for (int j : neg.batch) {
      if (j == i) throw DomainError("ecl_loss: batch negative collides with the anchor's positive");
      if (j < 0 || j >= N) throw ShapeError("ecl_loss: batch negative index out of range");
    }
    if (neg.tempo.rows() > 0) {
      if (neg.tempo.cols() != anchors.cols()) throw ShapeError("ecl_loss: tempo negatives have the wrong width");
      check_unit(neg.tempo, "tempo negative");
    }
    if (neg.jitter.rows() > 0) {
      if (neg.jitter.cols() != anchors.cols()) throw ShapeError("ecl_loss: jitter negatives have the wrong width");
      check_unit(neg.jitter, "jitter negative");
    }

    const auto za = anchors.row(i);
    logits.clear();
    logits.push_back(za.dot(positives.row(i)) / tau);
    for (int j : neg.batch) logits.push_back(za.dot(positives.row(j)) / tau);
    for (Eigen::Index r = 0; r < neg.tempo.rows(); ++r) logits.push_back(za.dot(neg.tempo.row(r)) / tau);
    for (Eigen::Index r = 0; r < neg.jitter.rows(); ++r) logits.push_back(za.dot(neg.jitter.row(r)) / tau);

    const double li = softmax_xent(logits, probs);
    out.per_anchor[static_cast<std::size_t>(i)] = li;
    out.value += dir_weight * li / static_cast<double>(N);

    const double w = dir_weight / (static_cast<double>(N) * tau);
    // d li / d logit_k = p_k - [k == 0]
    out.grad_anchors.row(i) += w * (probs[0] - 1.0) * positives.row(i);
    out.grad_positives.row(i) += w * (probs[0] - 1.0) * za;
    std::size_t k = 1;
    for (int j : neg.batch) {
      out.grad_anchors.row(i) += w * probs[k] * positives.row(j);
      out.grad_positives.row(j) += w * probs[k] * za;
      ++k;
    }
    for (Eigen::Index r = 0; r < neg.tempo.rows(); ++r, ++k) out.grad_anchors.row(i) += w * probs[k] * neg.tempo.row(r);
    for (Eigen::Index r = 0; r < neg.jitter.rows(); ++r, ++k) out.grad_anchors.row(i) += w * probs[k] * neg.jitter.row(r);
  }

  if (symmetric) {
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto zm = positives.row(i);
      logits.clear();
      logits.push_back(zm.dot(anchors.row(i)) / tau);
      for (int j : negatives[static_cast<std::size_t>(i)].batch) logits.push_back(zm.dot(anchors.row(j)) / tau);
      const double li = softmax_xent(logits, probs);
      out.value += 0.5 * li / static_cast<double>(N);
      const double w = 0.5 / (static_cast<double>(N) * tau);
      out.grad_positives.row(i) += w * (probs[0] - 1.0) * anchors.row(i);
      out.grad_anchors.row(i) += w * (probs[0] - 1.0) * zm;
      std::size_t k = 1;
      for (int j : negatives[static_cast<std::size_t>(i)].batch) {
        out.grad_positives.row(i) += w * probs[k] * anchors.row(j);
        out.grad_anchors.row(j) += w * probs[k] * zm;
        ++k;
      }
    }
  }
  return out;
}

SralResult sral_loss(std::span<const double> onset, std::span<const double> contact,
                     const std::vector<std::vector<double>>& accent_mass,
                     const std::vector<std::vector<double>>& energy_mass, const LossWeights& weights,
                     const SoftDtwConfig& dtw) {
  weights.validate();
  if (accent_mass.size() != energy_mass.size()) throw ShapeError("sral_loss: bar counts differ");
  SralResult out;
  const AlignmentResult beat = soft_dtw(onset, contact, dtw);
  out.beat_term = beat.value;
  out.grad_onset.resize(beat.grad_a.size());
  out.grad_contact.resize(beat.grad_b.size());
  for (std::size_t i = 0; i < beat.grad_a.size(); ++i) out.grad_onset[i] = weights.lambda_beat * beat.grad_a[i];
  for (std::size_t i = 0; i < beat.grad_b.size(); ++i) out.grad_contact[i] = weights.lambda_beat * beat.grad_b[i];

  const std::size_t bars = accent_mass.size();
  out.grad_accent_mass.resize(bars);
  out.grad_energy_mass.resize(bars);
  for (std::size_t j = 0; j < bars; ++j) {
    const AlignmentResult bar = emd_1d(accent_mass[j], energy_mass[j]);
    out.bar_term += bar.value / static_cast<double>(bars);
    const double w = weights.lambda_bar / static_cast<double>(bars);
    out.grad_accent_mass[j].resize(bar.grad_a.size());
    out.grad_energy_mass[j].resize(bar.grad_b.size());
    for (std::size_t i = 0; i < bar.grad_a.size(); ++i) out.grad_accent_mass[j][i] = w * bar.grad_a[i];
    for (std::size_t i = 0; i < bar.grad_b.size(); ++i) out.grad_energy_mass[j][i] = w * bar.grad_b[i];
  }
  out.value = weights.lambda_beat * out.beat_term + weights.lambda_bar * out.bar_term;
  return out;
}

SralResult sral_from_predictions(std::span<const double> onset_pred, std::span<const double> contact_pred,
                                 const BeatGrid& grid, const LossWeights& weights, const SoftDtwConfig& dtw) {
  const auto accent = bar_mass(onset_pred, grid);
  const auto energy = bar_mass(contact_pred, grid);
  SralResult out = sral_loss(onset_pred, contact_pred, accent, energy, weights, dtw);
  const auto ga = bar_mass_backward(onset_pred, grid, out.grad_accent_mass);
  const auto ge = bar_mass_backward(contact_pred, grid, out.grad_energy_mass);
  for (std::size_t i = 0; i < ga.size(); ++i) out.grad_onset[i] += ga[i];
  for (std::size_t i = 0; i < ge.size(); ++i) out.grad_contact[i] += ge[i];
  return out;
}

SralResult sral_from_annotations(const Clip& clip, const LossWeights& weights, const SoftDtwConfig& dtw) {
  return sral_loss(clip.audio.annotation.onset_envelope, clip.motion.annotation.contact_pulse,
                   clip.audio.annotation.bar_accent_mass, clip.motion.annotation.bar_energy_mass, weights, dtw);
}

double total_loss(double ecl_value, double sral_value, double alpha) {
  if (!(alpha >= 0.0)) throw DomainError("alpha must be >= 0");
  return ecl_value + alpha * sral_value;
}

ScalarLoss mean_squared_error(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw ShapeError("mse: length mismatch");
  ScalarLoss out;
  out.grad.resize(pred.size());
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    out.value += d * d / n;
    out.grad[i] = 2.0 * d / n;
  }
  return out;
}

ScalarLoss binary_cross_entropy(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw ShapeError("bce: length mismatch");
  constexpr double lo = 1e-7;
  ScalarLoss out;
  out.grad.resize(pred.size());
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], lo, 1.0 - lo);
    const double y = target[i];
    out.value += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) / n;
    const bool clamped = pred[i] < lo || pred[i] > 1.0 - lo;
    out.grad[i] = clamped ? 0.0 : (-(y / p) + (1.0 - y) / (1.0 - p)) / n;
  }
  return out;
}

}  // namespace motionbeat
