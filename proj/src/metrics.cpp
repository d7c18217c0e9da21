#include "motionbeat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "motionbeat/errors.hpp"

namespace motionbeat {

const char* to_string(RetrievalDirection d) {
  return d == RetrievalDirection::music_to_motion ? "music_to_motion" : "motion_to_music";
}

RetrievalReport retrieval_from_similarity(const Matrix& similarity, RetrievalDirection direction,
                                          std::span<const int> ks) {
  const Eigen::Index n = similarity.rows();
  if (n < 1 || similarity.cols() != n) throw ShapeError("retrieval: similarity must be square and non-empty");
  RetrievalReport report;
  report.direction = direction;
  report.ranks.resize(static_cast<std::size_t>(n));
  std::vector<int> order(static_cast<std::size_t>(n));
  for (Eigen::Index q = 0; q < n; ++q) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return similarity(q, a) > similarity(q, b); });
    const auto pos = std::find(order.begin(), order.end(), static_cast<int>(q)) - order.begin();
    report.ranks[static_cast<std::size_t>(q)] = static_cast<int>(pos) + 1;
  }
  for (int k : ks) {
    const auto hits = std::count_if(report.ranks.begin(), report.ranks.end(), [k](int r) { return r <= k; });
    report.recall_at[k] = 100.0 * static_cast<double>(hits) / static_cast<double>(n);
  }
  std::vector<int> sorted = report.ranks;
  std::sort(sorted.begin(), sorted.end());
  const auto mid = sorted.size() / 2;
  report.median_rank = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return report;
}

RetrievalReport eval_retrieval(const Matrix& audio, const Matrix& motion, RetrievalDirection direction,
                               std::span<const int> ks) {
  if (audio.rows() != motion.rows() || audio.cols() != motion.cols()) {
    throw ShapeError("eval_retrieval: audio and motion embeddings must have the same shape");
  }
  for (const Matrix* m : {&audio, &motion}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      if (std::abs(m->row(r).norm() - 1.0) > 1e-3) throw DomainError("eval_retrieval: embeddings must be unit norm");
    }
  }
  const Matrix sim = direction == RetrievalDirection::music_to_motion ? Matrix(audio * motion.transpose())
                                                                      : Matrix(motion * audio.transpose());
  return retrieval_from_similarity(sim, direction, ks);
}

std::string retrieval_json(const RetrievalReport& report) {
  nlohmann::ordered_json j;
  j["direction"] = to_string(report.direction);
  nlohmann::ordered_json recall;
  for (const auto& [k, v] : report.recall_at) recall["R@" + std::to_string(k)] = v;
  j["recall_at"] = recall;
  j["median_rank"] = report.median_rank;
  j["num_queries"] = report.ranks.size();
  return j.dump();
}

double beat_alignment_score(std::span<const double> music_beats, std::span<const double> motion_beats, double sigma) {
  if (music_beats.empty() || motion_beats.empty()) throw DomainError("beat_alignment_score: empty beat list");
  if (!(sigma > 0.0)) throw DomainError("beat_alignment_score: sigma must be > 0");
  double total = 0.0;
  for (double t : music_beats) {
    const auto it = std::lower_bound(motion_beats.begin(), motion_beats.end(), t);
    double best = std::numeric_limits<double>::infinity();
    if (it != motion_beats.end()) best = std::min(best, std::abs(*it - t));
    if (it != motion_beats.begin()) best = std::min(best, std::abs(*(it - 1) - t));
    total += std::exp(-best * best / (2.0 * sigma * sigma));
  }
  return total / static_cast<double>(music_beats.size());
}

std::vector<double> peak_beat_times(std::span<const double> per_beat, std::span<const double> boundaries,
                                    double threshold) {
  const std::size_t K = per_beat.size();
  if (boundaries.size() < K) throw ShapeError("peak_beat_times: need one boundary per beat");
  std::vector<double> out;
  for (std::size_t t = 0; t < K; ++t) {
    const double v = per_beat[t];
    const double prev = per_beat[(t + K - 1) % K];
    const double next = per_beat[(t + 1) % K];
    if (v > threshold && (K == 1 || (v > prev && v >= next))) out.push_back(boundaries[t]);
  }
  return out;
}

}  // namespace motionbeat
