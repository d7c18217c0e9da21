#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "motionbeat/tensor.hpp"

namespace motionbeat {

enum class RetrievalDirection { music_to_motion, motion_to_music };

const char* to_string(RetrievalDirection d);

struct RetrievalReport {
  RetrievalDirection direction = RetrievalDirection::music_to_motion;
  std::map<int, double> recall_at;  // K -> percentage
  double median_rank = 0.0;
  std::vector<int> ranks;           // 1-based rank of the true pair per query
};

// Ranks candidates for every query of a similarity matrix (queries x
// candidates, true pair on the diagonal). Ties go to the lower candidate index.
RetrievalReport retrieval_from_similarity(const Matrix& similarity, RetrievalDirection direction,
                                          std::span<const int> ks = std::vector<int>{1, 5, 10});

// Row i of audio and motion embeddings form a pair; rows must be unit norm.
RetrievalReport eval_retrieval(const Matrix& audio, const Matrix& motion, RetrievalDirection direction,
                               std::span<const int> ks = std::vector<int>{1, 5, 10});

std::string retrieval_json(const RetrievalReport& report);

// Mean over music beats of exp(-d^2 / (2 sigma^2)), d = distance to the
// nearest motion beat. Both lists sorted and non-empty.
double beat_alignment_score(std::span<const double> music_beats, std::span<const double> motion_beats,
                            double sigma = 0.1);

// Times (beat boundaries) of beats whose value is a strict local maximum above
// `threshold`, comparing cyclic neighbours.
std::vector<double> peak_beat_times(std::span<const double> per_beat, std::span<const double> boundaries,
                                    double threshold = 0.0);

}  // namespace motionbeat
