#pragma once

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "gnncomp/core.hpp"

// Tape-free reverse-mode autodiff: every op result keeps its parents and a
// backward closure; `backward` walks the DAG in reverse topological order.
namespace gnncomp::ad {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  float item() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

inline Var constant(Matrix value) { return Var(std::move(value), false); }
inline Var leaf(Matrix value) { return Var(std::move(value), true); }

/// Builds a result node. `backward` is recorded only when some parent needs a
/// gradient; it receives the result node (with its grad populated).
Var make_op(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward);

/// Populates grads of every reachable node that requires them, then drops the
/// parent links of intermediate nodes. Throws ShapeError for non-scalar loss.
void backward(const Var& loss);

Var matmul(const Var& a, const Var& b);
Var spmm(std::shared_ptr<const CsrMatrix> adj, const Var& x);
Var add(const Var& a, const Var& b);
/// x[n x d] + b[1 x d] broadcast over rows.
Var add_bias(const Var& x, const Var& bias);
Var scale(const Var& x, float alpha);
Var mul(const Var& a, const Var& b);
Var sum(const Var& x);
Var relu(const Var& x);
Var elu(const Var& x, float alpha = 1.0f);
Var sigmoid(const Var& x);
/// Inverted dropout; identity when `train` is false or p == 0.
Var dropout(const Var& x, float p, bool train, std::mt19937_64& rng);
Var gather_rows(const Var& x, std::span<const Index> rows);
/// Sums rows into `num_segments` buckets given a per-row segment id.
Var segment_sum(const Var& x, std::span<const Index> segment, Index num_segments);
/// Row-wise dot products z[u]·z[v] for each pair, as an [m x 1] column.
Var pair_dot(const Var& z, std::span<const std::pair<Index, Index>> pairs);

struct BatchNormStats {
  Matrix running_mean;  // 1 x d
  Matrix running_var;   // 1 x d
  float momentum = 0.1f;
  float eps = 1e-5f;
};

/// Batch statistics in training (updating running stats), running stats otherwise.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats, bool train);

/// Mean softmax cross-entropy of `logits` rows against integer labels.
Var softmax_cross_entropy(const Var& logits, std::span<const int> labels);
/// Mean binary cross-entropy with logits; `logits` is [m x 1].
Var bce_with_logits(const Var& logits, std::span<const float> targets);

}  // namespace gnncomp::ad
