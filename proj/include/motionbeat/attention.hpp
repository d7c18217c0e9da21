#pragma once

#include <span>
#include <vector>

#include "motionbeat/tensor.hpp"

namespace motionbeat {

// 2*pi*(t mod B)/B.
double bar_phase(int t, int bar_len);

// Rotates consecutive channel pairs (x, y) by phi. Throws on odd length.
std::vector<double> phase_rotate(std::span<const double> vec, double phi);

// Rotates every row of `m` in place by its own phase (angle sign * phases[t]).
void rotate_rows(Matrix& m, std::span<const double> phases, double sign = 1.0);

struct AttentionOutput {
  Matrix output;   // K x head_dim
  Matrix weights;  // K x K, rows sum to 1
};

// Contact-guided attention for one head on already-rotated queries and keys:
//   A_tu = softmax_u(<q_t, k_u> / sqrt(d_h) + alpha_logit * r_u)
//   out_t = sum_u A_tu (1 + alpha_val * r_u) v_u
// An empty `contacts` span is plain scaled dot-product attention.
AttentionOutput contact_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                  std::span<const double> contacts, double alpha_logit, double alpha_val);

struct AttentionGrads {
  Matrix dq, dk, dv;
  double d_alpha_logit = 0.0;
  double d_alpha_val = 0.0;
};

AttentionGrads contact_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                          std::span<const double> contacts, double alpha_val,
                                          const Matrix& weights, const Matrix& d_output);

}  // namespace motionbeat
