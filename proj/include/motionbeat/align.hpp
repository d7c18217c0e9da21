#pragma once

#include <span>
#include <vector>

namespace motionbeat {

struct SoftDtwConfig {
  double gamma = 0.1;  // soft-min temperature, > 0
};

struct AlignmentResult {
  double value = 0.0;
  std::vector<double> grad_a;
  std::vector<double> grad_b;
};

// Soft-DTW with squared-difference cost between scalar sequences.
// soft-min(x) = -gamma * log(sum exp(-x / gamma)), evaluated with a max shift.
AlignmentResult soft_dtw(std::span<const double> a, std::span<const double> b, const SoftDtwConfig& cfg = {});

// Exact DTW by min-plus dynamic programming.
double hard_dtw_oracle(std::span<const double> a, std::span<const double> b);

// Exact DTW by enumerating every monotone alignment path; sizes up to 12.
double hard_dtw_enumerate(std::span<const double> a, std::span<const double> b);

// 1D earth mover's distance with ground metric |i - j| on bin indices.
// Inputs further than 1e-6 from the simplex are renormalized.
AlignmentResult emd_1d(std::span<const double> p, std::span<const double> q);

// Transport cost of the monotone (north-west corner) coupling, which is
// optimal for |i - j| in one dimension.
double emd_oracle(std::span<const double> p, std::span<const double> q);

}  // namespace motionbeat
