#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "motionbeat/tensor.hpp"

namespace motionbeat::ad {

class Graph;

// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
// order, so the backward sweep walks ids from last to first.
class Graph {
 public:
  using Backward = std::function<void(Graph&, int self)>;

  Var leaf(Matrix value, bool requires_grad);
  Var node(Matrix value, std::vector<int> parents, Backward backward);

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  // Gradient of a node; zero matrix when nothing flowed into it.
  Matrix grad(int id) const;

  // Adds `g` into the gradient buffer of `id` when that node requires a gradient.
  void accumulate(int id, const Matrix& g);
  const Matrix& upstream(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  // Seeds d loss / d var for each pair, then propagates to all leaves.
  void backward(std::span<const std::pair<Var, Matrix>> seeds);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var add_row(Var x, Var bias);  // bias is 1 x cols, broadcast over rows
Var scale(Var x, double s);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);  // per row
Var gelu(Var x);                                               // erf form
Var softplus(Var x);
Var sigmoid(Var x);
Var mean_rows(Var x);          // 1 x cols
Var l2_normalize_rows(Var x);

// Multi-head attention on K x hidden projections. Query and key channel pairs
// of every head are rotated by phases[t]; when contacts is non-null the logits
// get alpha_logit * r_u and values are scaled by (1 + alpha_val * r_u).
// alpha_logit / alpha_val are 1 x 1 nodes.
Var phase_attention(Var q, Var k, Var v, std::span<const double> phases, int num_heads,
                    const std::vector<double>* contacts, Var alpha_logit, Var alpha_val);

}  // namespace motionbeat::ad
