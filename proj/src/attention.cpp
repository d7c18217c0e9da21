#include "motionbeat/attention.hpp"

#include <cmath>
#include <numbers>

#include "motionbeat/errors.hpp"

namespace motionbeat {

double bar_phase(int t, int bar_len) {
  if (t < 0 || bar_len < 1) throw DomainError("bar_phase needs t >= 0 and B >= 1");
  return 2.0 * std::numbers::pi * static_cast<double>(t % bar_len) / bar_len;
}

std::vector<double> phase_rotate(std::span<const double> vec, double phi) {
  if (vec.size() % 2 != 0) throw DomainError("phase_rotate needs an even number of channels");
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  std::vector<double> out(vec.size());
  for (std::size_t i = 0; i < vec.size(); i += 2) {
    out[i] = vec[i] * c - vec[i + 1] * s;
    out[i + 1] = vec[i] * s + vec[i + 1] * c;
  }
  return out;
}

void rotate_rows(Matrix& m, std::span<const double> phases, double sign) {
  if (m.cols() % 2 != 0) throw DomainError("rotate_rows needs an even number of channels");
  if (static_cast<std::size_t>(m.rows()) != phases.size()) throw ShapeError("rotate_rows: one phase per row");
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    const double c = std::cos(phases[static_cast<std::size_t>(t)]);
    const double s = sign * std::sin(phases[static_cast<std::size_t>(t)]);
    for (Eigen::Index i = 0; i < m.cols(); i += 2) {
      const double x = m(t, i);
      const double y = m(t, i + 1);
      m(t, i) = x * c - y * s;
      m(t, i + 1) = x * s + y * c;
    }
  }
}

namespace {

void check_inputs(const Matrix& q, const Matrix& k, const Matrix& v, std::span<const double> contacts) {
  if (q.cols() != k.cols()) throw ShapeError("attention: query and key widths differ");
  if (k.rows() != v.rows()) throw ShapeError("attention: key and value lengths differ");
  if (!contacts.empty()) {
    if (contacts.size() != static_cast<std::size_t>(k.rows())) throw ShapeError("attention: one contact per key");
    for (double r : contacts) {
      if (!(r >= 0.0 && r <= 1.0)) throw DomainError("contact probabilities must lie in [0, 1]");
    }
  }
}

}  // namespace

AttentionOutput contact_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                  std::span<const double> contacts, double alpha_logit, double alpha_val) {
  check_inputs(q, k, v, contacts);
  if (!(alpha_logit >= 0.0) || !(alpha_val >= 0.0)) throw DomainError("contact gains must be nonnegative");
  const Eigen::Index n = k.rows();
  AttentionOutput out;
  out.weights = (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
  Matrix scaled_v = v;
  if (!contacts.empty()) {
    for (Eigen::Index u = 0; u < n; ++u) {
      const double r = contacts[static_cast<std::size_t>(u)];
      out.weights.col(u).array() += alpha_logit * r;
      scaled_v.row(u) *= 1.0 + alpha_val * r;
    }
  }
  for (Eigen::Index t = 0; t < out.weights.rows(); ++t) {
    auto row = out.weights.row(t);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp();
    row /= row.sum();
  }
  out.output = out.weights * scaled_v;
  return out;
}

AttentionGrads contact_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                          std::span<const double> contacts, double alpha_val,
                                          const Matrix& weights, const Matrix& d_output) {
  const Eigen::Index n = k.rows();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  std::vector<double> gain(static_cast<std::size_t>(n), 1.0);
  if (!contacts.empty()) {
    for (Eigen::Index u = 0; u < n; ++u) gain[static_cast<std::size_t>(u)] = 1.0 + alpha_val * contacts[static_cast<std::size_t>(u)];
  }
  Matrix scaled_v = v;
  for (Eigen::Index u = 0; u < n; ++u) scaled_v.row(u) *= gain[static_cast<std::size_t>(u)];

  AttentionGrads g;
  const Matrix d_weights = d_output * scaled_v.transpose();
  const Matrix d_scaled_v = weights.transpose() * d_output;
  g.dv = d_scaled_v;
  for (Eigen::Index u = 0; u < n; ++u) g.dv.row(u) *= gain[static_cast<std::size_t>(u)];

  // softmax backward, row by row
  Matrix d_logits = weights.cwiseProduct(d_weights);
  const Eigen::VectorXd row_dot = d_logits.rowwise().sum();
  d_logits -= weights.cwiseProduct(row_dot.replicate(1, n));

  g.dq = d_logits * k * inv_sqrt;
  g.dk = d_logits.transpose() * q * inv_sqrt;
  if (!contacts.empty()) {
    const Eigen::RowVectorXd col_sum = d_logits.colwise().sum();
    for (Eigen::Index u = 0; u < n; ++u) {
      const double r = contacts[static_cast<std::size_t>(u)];
      g.d_alpha_logit += col_sum(u) * r;
      g.d_alpha_val += r * d_scaled_v.row(u).dot(v.row(u));
    }
  }
  return g;
}

}  // namespace motionbeat
