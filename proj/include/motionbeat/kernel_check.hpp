#pragma once

#include <cstdint>

namespace motionbeat {

struct KernelCheckReport {
  double max_rel_error = 0.0;
  int checked = 0;  // scalar comparisons
};

// Soft-DTW gradients against central differences (h = 1e-4) on random
// sequences of length 2..8.
KernelCheckReport check_soft_dtw_gradients(int instances, std::uint64_t seed, double gamma = 0.1);

// EMD gradients against central differences along simplex-tangent directions
// e_i - e_j (h = 1e-3), on random simplex pairs whose CDFs stay at least 10h
// clear of ties. The loss is piecewise linear, so the differences are exact there.
KernelCheckReport check_emd_gradients(int instances, std::uint64_t seed);

}  // namespace motionbeat
