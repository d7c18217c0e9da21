#include "motionbeat/autodiff.hpp"

#include <cmath>
#include <algorithm>
#include <numbers>
#include <string>

#include "motionbeat/attention.hpp"
#include "motionbeat/errors.hpp"

namespace motionbeat::ad {

const Matrix& Var::value() const { return graph->value(id); }

Var Graph::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::node(Matrix value, std::vector<int> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) n.requires_grad = n.requires_grad || requires_grad(p);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix Graph::grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.has_grad) return n.grad;
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

void Graph::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
    throw ShapeError("gradient shape mismatch at node " + std::to_string(id));
  }
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

void Graph::backward(std::span<const std::pair<Var, Matrix>> seeds) {
  int top = -1;
  for (const auto& [var, g] : seeds) {
    accumulate(var.id, g);
    top = std::max(top, var.id);
  }
  for (int id = top; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.has_grad && n.backward) n.backward(*this, id);
  }
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Graph& g = *a.graph;
  return g.node(a.value() * b.value(), {a.id, b.id}, [a, b](Graph& gr, int self) {
    const Matrix& up = gr.upstream(self);
    if (gr.requires_grad(a.id)) gr.accumulate(a.id, up * gr.value(b.id).transpose());
    if (gr.requires_grad(b.id)) gr.accumulate(b.id, gr.value(a.id).transpose() * up);
  });
}

Var add(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: shapes differ");
  return a.graph->node(a.value() + b.value(), {a.id, b.id}, [a, b](Graph& gr, int self) {
    gr.accumulate(a.id, gr.upstream(self));
    gr.accumulate(b.id, gr.upstream(self));
  });
}

Var add_row(Var x, Var bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) throw ShapeError("add_row: bias must be 1 x cols");
  Matrix out = x.value();
  out.rowwise() += bias.value().row(0);
  return x.graph->node(std::move(out), {x.id, bias.id}, [x, bias](Graph& gr, int self) {
    const Matrix& up = gr.upstream(self);
    gr.accumulate(x.id, up);
    if (gr.requires_grad(bias.id)) gr.accumulate(bias.id, up.colwise().sum());
  });
}

Var scale(Var x, double s) {
  return x.graph->node(x.value() * s, {x.id}, [x, s](Graph& gr, int self) { gr.accumulate(x.id, gr.upstream(self) * s); });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& X = x.value();
  const Eigen::Index n = X.cols();
  if (gain.cols() != n || bias.cols() != n) throw ShapeError("layer_norm: parameter width mismatch");
  Matrix xhat(X.rows(), n);
  Eigen::VectorXd inv_std(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mean = X.row(r).mean();
    const double var = (X.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return x.graph->node(std::move(out), {x.id, gain.id, bias.id},
                       [x, gain, bias, xhat, inv_std](Graph& gr, int self) {
                         const Matrix& up = gr.upstream(self);
                         if (gr.requires_grad(gain.id)) gr.accumulate(gain.id, up.cwiseProduct(xhat).colwise().sum());
                         if (gr.requires_grad(bias.id)) gr.accumulate(bias.id, up.colwise().sum());
                         if (!gr.requires_grad(x.id)) return;
                         const Matrix dxhat = up.array().rowwise() * gr.value(gain.id).row(0).array();
                         const double n = static_cast<double>(xhat.cols());
                         Matrix dx(xhat.rows(), xhat.cols());
                         for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                           const double s1 = dxhat.row(r).sum();
                           const double s2 = dxhat.row(r).dot(xhat.row(r));
                           dx.row(r) = (inv_std(r) / n) * (n * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2);
                         }
                         gr.accumulate(x.id, dx);
                       });
}

Var gelu(Var x) {
  const Matrix& X = x.value();
  Matrix out(X.rows(), X.cols());
  Matrix deriv(X.rows(), X.cols());
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    const double v = X.data()[i];
    const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
    out.data()[i] = v * cdf;
    deriv.data()[i] = cdf + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
  }
  return x.graph->node(std::move(out), {x.id}, [x, deriv](Graph& gr, int self) {
    gr.accumulate(x.id, gr.upstream(self).cwiseProduct(deriv));
  });
}

Var softplus(Var x) {
  const Matrix& X = x.value();
  Matrix out(X.rows(), X.cols());
  Matrix deriv(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    const double v = X.data()[i];
    out.data()[i] = v > 30.0 ? v : (v < -30.0 ? std::exp(v) : std::log1p(std::exp(v)));
    deriv.data()[i] = 1.0 / (1.0 + std::exp(-v));
  }
  return x.graph->node(std::move(out), {x.id}, [x, deriv](Graph& gr, int self) {
    gr.accumulate(x.id, gr.upstream(self).cwiseProduct(deriv));
  });
}

Var sigmoid(Var x) {
  const Matrix& X = x.value();
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    const double v = X.data()[i];
    out.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  Matrix deriv = out.cwiseProduct((1.0 - out.array()).matrix());
  return x.graph->node(std::move(out), {x.id}, [x, deriv](Graph& gr, int self) {
    gr.accumulate(x.id, gr.upstream(self).cwiseProduct(deriv));
  });
}

Var mean_rows(Var x) {
  const auto rows = static_cast<double>(x.rows());
  return x.graph->node(x.value().colwise().mean(), {x.id}, [x, rows](Graph& gr, int self) {
    gr.accumulate(x.id, gr.upstream(self).replicate(x.rows(), 1) / rows);
  });
}

Var l2_normalize_rows(Var x) {
  const Matrix& X = x.value();
  Eigen::VectorXd norms = X.rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (!(norms(r) > 0.0)) throw DomainError("cannot normalize a zero vector");
  }
  Matrix y = X.array().colwise() / norms.array();
  return x.graph->node(y, {x.id}, [x, y, norms](Graph& gr, int self) {
    const Matrix& up = gr.upstream(self);
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      dx.row(r) = (up.row(r) - y.row(r) * y.row(r).dot(up.row(r))) / norms(r);
    }
    gr.accumulate(x.id, dx);
  });
}

Var phase_attention(Var q, Var k, Var v, std::span<const double> phases, int num_heads,
                    const std::vector<double>* contacts, Var alpha_logit, Var alpha_val) {
  const Eigen::Index K = q.rows();
  const Eigen::Index hidden = q.cols();
  if (k.rows() != K || v.rows() != K || k.cols() != hidden || v.cols() != hidden) {
    throw ShapeError("phase_attention: q, k, v must share shape");
  }
  if (num_heads < 1 || hidden % num_heads != 0) throw ShapeError("phase_attention: hidden not divisible by heads");
  const Eigen::Index dh = hidden / num_heads;
  if (dh % 2 != 0) throw ShapeError("phase_attention: head dimension must be even");
  if (static_cast<std::size_t>(K) != phases.size()) throw ShapeError("phase_attention: one phase per token");

  const std::vector<double> r = contacts ? *contacts : std::vector<double>{};
  const std::vector<double> ph(phases.begin(), phases.end());
  const double a_logit = alpha_logit.value()(0, 0);
  const double a_val = alpha_val.value()(0, 0);

  struct HeadCache {
    Matrix q, k, weights;
  };
  std::vector<HeadCache> cache(static_cast<std::size_t>(num_heads));
  Matrix out(K, hidden);
  for (int h = 0; h < num_heads; ++h) {
    Matrix qh = q.value().middleCols(h * dh, dh);
    Matrix kh = k.value().middleCols(h * dh, dh);
    rotate_rows(qh, ph);
    rotate_rows(kh, ph);
    AttentionOutput att = contact_attention(qh, kh, v.value().middleCols(h * dh, dh), r, a_logit, a_val);
    out.middleCols(h * dh, dh) = att.output;
    cache[static_cast<std::size_t>(h)] = {std::move(qh), std::move(kh), std::move(att.weights)};
  }

  return q.graph->node(
      std::move(out), {q.id, k.id, v.id, alpha_logit.id, alpha_val.id},
      [q, k, v, alpha_logit, alpha_val, r, ph, a_val, num_heads, dh, cache](Graph& gr, int self) {
        const Matrix& up = gr.upstream(self);
        Matrix dq(up.rows(), up.cols()), dk(up.rows(), up.cols()), dv(up.rows(), up.cols());
        double da_logit = 0.0, da_val = 0.0;
        for (int h = 0; h < num_heads; ++h) {
          const HeadCache& c = cache[static_cast<std::size_t>(h)];
          const Matrix vh = gr.value(v.id).middleCols(h * dh, dh);
          AttentionGrads g = contact_attention_backward(c.q, c.k, vh, r, a_val, c.weights, up.middleCols(h * dh, dh));
          rotate_rows(g.dq, ph, -1.0);
          rotate_rows(g.dk, ph, -1.0);
          dq.middleCols(h * dh, dh) = g.dq;
          dk.middleCols(h * dh, dh) = g.dk;
          dv.middleCols(h * dh, dh) = g.dv;
          da_logit += g.d_alpha_logit;
          da_val += g.d_alpha_val;
        }
        gr.accumulate(q.id, dq);
        gr.accumulate(k.id, dk);
        gr.accumulate(v.id, dv);
        gr.accumulate(alpha_logit.id, Matrix::Constant(1, 1, da_logit));
        gr.accumulate(alpha_val.id, Matrix::Constant(1, 1, da_val));
      });
}

}  // namespace motionbeat::ad
