#include "gnncomp/autodiff.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

namespace gnncomp::ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

}  // namespace

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

float Var::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item: not a scalar");
  return value()(0, 0);
}

Var make_op(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const auto& p : parents) node->requires_grad = node->requires_grad || p.requires_grad();
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward: loss must be a scalar");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS over nodes that require gradients.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
  for (Node* n : order) {
    if (n->backward_fn) {
      n->backward_fn = nullptr;
      n->parents.clear();
      n->grad.resize(0, 0);
    }
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.rows()) + " differ");
  }
  Matrix out = a.value() * b.value();
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * self.grad);
  });
}

Var spmm(std::shared_ptr<const CsrMatrix> adj, const Var& x) {
  if (adj->cols() != x.rows()) {
    throw ShapeError("spmm: adjacency has " + std::to_string(adj->cols()) + " columns, input has " +
                     std::to_string(x.rows()) + " rows");
  }
  Matrix out = (*adj) * x.value();
  return make_op(std::move(out), {x}, [adj](Node& self) {
    parent(self, 0).accumulate(adj->transpose() * self.grad);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (parent(self, i).requires_grad) parent(self, i).accumulate(self.grad);
    }
  });
}

Var add_bias(const Var& x, const Var& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) throw ShapeError("add_bias: bias must be 1 x cols");
  Matrix out = x.value().rowwise() + bias.value().row(0);
  return make_op(std::move(out), {x, bias}, [](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad);
    if (parent(self, 1).requires_grad) parent(self, 1).accumulate(self.grad.colwise().sum());
  });
}

Var scale(const Var& x, float alpha) {
  return make_op(x.value() * alpha, {x}, [alpha](Node& self) { parent(self, 0).accumulate(self.grad * alpha); });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(self.grad.cwiseProduct(pa.value));
  });
}

Var sum(const Var& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return make_op(std::move(out), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate(Matrix::Constant(p.value.rows(), p.value.cols(), self.grad(0, 0)));
  });
}

Var relu(const Var& x) {
  Matrix out = x.value().cwiseMax(0.0f);
  return make_op(std::move(out), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate((p.value.array() > 0.0f).select(self.grad, 0.0f));
  });
}

Var elu(const Var& x, float alpha) {
  Matrix out = x.value().unaryExpr([alpha](float v) { return v > 0 ? v : alpha * std::expm1(v); });
  return make_op(std::move(out), {x}, [alpha](Node& self) {
    Node& p = parent(self, 0);
    Matrix d = p.value.unaryExpr([alpha](float v) { return v > 0 ? 1.0f : alpha * std::exp(v); });
    p.accumulate(self.grad.cwiseProduct(d));
  });
}

Var sigmoid(const Var& x) {
  Matrix out = x.value().unaryExpr([](float v) { return 1.0f / (1.0f + std::exp(-v)); });
  return make_op(std::move(out), {x}, [](Node& self) {
    Matrix d = self.value.array() * (1.0f - self.value.array());
    parent(self, 0).accumulate(self.grad.cwiseProduct(d));
  });
}

Var dropout(const Var& x, float p, bool train, std::mt19937_64& rng) {
  if (!train || p <= 0.0f) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const float inv = 1.0f / (1.0f - p);
  Matrix mask(x.rows(), x.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? inv : 0.0f;
  Matrix out = x.value().cwiseProduct(mask);
  return make_op(std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    parent(self, 0).accumulate(self.grad.cwiseProduct(mask));
  });
}

Var gather_rows(const Var& x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= x.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Index>(k)) = x.value().row(rows[k]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return make_op(std::move(out), {x}, [idx = std::move(idx)](Node& self) {
    Node& p = parent(self, 0);
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) g.row(idx[k]) += self.grad.row(static_cast<Index>(k));
    p.accumulate(g);
  });
}

Var segment_sum(const Var& x, std::span<const Index> segment, Index num_segments) {
  if (static_cast<Index>(segment.size()) != x.rows()) throw ShapeError("segment_sum: segment ids must cover every row");
  Matrix out = Matrix::Zero(num_segments, x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const Index s = segment[static_cast<std::size_t>(i)];
    if (s < 0 || s >= num_segments) throw ShapeError("segment_sum: segment id out of range");
    out.row(s) += x.value().row(i);
  }
  std::vector<Index> seg(segment.begin(), segment.end());
  return make_op(std::move(out), {x}, [seg = std::move(seg)](Node& self) {
    Node& p = parent(self, 0);
    Matrix g(p.value.rows(), p.value.cols());
    for (Index i = 0; i < g.rows(); ++i) g.row(i) = self.grad.row(seg[static_cast<std::size_t>(i)]);
    p.accumulate(g);
  });
}

Var pair_dot(const Var& z, std::span<const std::pair<Index, Index>> pairs) {
  Matrix out(static_cast<Index>(pairs.size()), 1);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [u, v] = pairs[k];
    if (u < 0 || v < 0 || u >= z.rows() || v >= z.rows()) throw ShapeError("pair_dot: node index out of range");
    out(static_cast<Index>(k), 0) = z.value().row(u).dot(z.value().row(v));
  }
  std::vector<std::pair<Index, Index>> pr(pairs.begin(), pairs.end());
  return make_op(std::move(out), {z}, [pr = std::move(pr)](Node& self) {
    Node& p = parent(self, 0);
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t k = 0; k < pr.size(); ++k) {
      const float gk = self.grad(static_cast<Index>(k), 0);
      g.row(pr[k].first) += gk * p.value.row(pr[k].second);
      g.row(pr[k].second) += gk * p.value.row(pr[k].first);
    }
    p.accumulate(g);
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats, bool train) {
  const Index d = x.cols();
  if (gamma.cols() != d || beta.cols() != d) throw ShapeError("batch_norm: parameter width mismatch");
  if (stats.running_mean.size() == 0) {
    stats.running_mean = Matrix::Zero(1, d);
    stats.running_var = Matrix::Ones(1, d);
  }
  const float eps = stats.eps;
  if (!train) {
    Matrix inv_std = (stats.running_var.array() + eps).rsqrt();
    Matrix xhat = (x.value().rowwise() - stats.running_mean.row(0)).array().rowwise() * inv_std.row(0).array();
    Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
    return make_op(std::move(out), {x, gamma, beta}, [xhat, inv_std](Node& self) {
      Node& px = parent(self, 0);
      Node& pg = parent(self, 1);
      Node& pb = parent(self, 2);
      if (px.requires_grad) {
        px.accumulate((self.grad.array().rowwise() * (pg.value.row(0).array() * inv_std.row(0).array())).matrix());
      }
      if (pg.requires_grad) pg.accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
      if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
    });
  }

  const Index n = x.rows();
  Matrix mean = x.value().colwise().mean();
  Matrix centered = x.value().rowwise() - mean.row(0);
  Matrix var = centered.array().square().colwise().sum() / static_cast<float>(n);
  Matrix inv_std = (var.array() + eps).rsqrt();
  Matrix xhat = centered.array().rowwise() * inv_std.row(0).array();
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();

  const float m = stats.momentum;
  const float unbias = n > 1 ? static_cast<float>(n) / static_cast<float>(n - 1) : 1.0f;
  stats.running_mean = (1 - m) * stats.running_mean + m * mean;
  stats.running_var = (1 - m) * stats.running_var + m * unbias * var;

  return make_op(std::move(out), {x, gamma, beta}, [xhat, inv_std, n](Node& self) {
    Node& px = parent(self, 0);
    Node& pg = parent(self, 1);
    Node& pb = parent(self, 2);
    if (px.requires_grad) {
      Matrix dxhat = self.grad.array().rowwise() * pg.value.row(0).array();
      Matrix sum_d = dxhat.colwise().sum();
      Matrix sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
      Matrix dx = (static_cast<float>(n) * dxhat.array()).rowwise() - sum_d.row(0).array();
      dx -= (xhat.array().rowwise() * sum_dx.row(0).array()).matrix();
      dx = dx.array().rowwise() * (inv_std.row(0).array() / static_cast<float>(n));
      px.accumulate(dx);
    }
    if (pg.requires_grad) pg.accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
    if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
  });
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> labels) {
  const Index n = logits.rows();
  if (static_cast<Index>(labels.size()) != n) throw ShapeError("softmax_cross_entropy: label count mismatch");
  if (n == 0) throw ShapeError("softmax_cross_entropy: empty batch");
  Matrix prob(n, logits.cols());
  double loss = 0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw ShapeError("softmax_cross_entropy: label out of range");
    const auto row = logits.value().row(i);
    const float mx = row.maxCoeff();
    const auto shifted = (row.array() - mx);
    const float lse = std::log(shifted.exp().sum());
    prob.row(i) = (shifted - lse).exp();
    loss += static_cast<double>(lse - shifted(y));
  }
  Matrix out(1, 1);
  out(0, 0) = static_cast<float>(loss / static_cast<double>(n));
  std::vector<int> y(labels.begin(), labels.end());
  return make_op(std::move(out), {logits}, [prob = std::move(prob), y = std::move(y)](Node& self) {
    Matrix g = prob;
    for (std::size_t i = 0; i < y.size(); ++i) g(static_cast<Index>(i), y[i]) -= 1.0f;
    g *= self.grad(0, 0) / static_cast<float>(y.size());
    parent(self, 0).accumulate(g);
  });
}

Var bce_with_logits(const Var& logits, std::span<const float> targets) {
  const Index m = logits.rows();
  if (logits.cols() != 1 || static_cast<Index>(targets.size()) != m || m == 0) {
    throw ShapeError("bce_with_logits: expected non-empty [m x 1] logits matching targets");
  }
  double loss = 0;
  for (Index k = 0; k < m; ++k) {
    const float x = logits.value()(k, 0);
    const float t = targets[static_cast<std::size_t>(k)];
    loss += static_cast<double>(std::max(x, 0.0f) - x * t + std::log1p(std::exp(-std::abs(x))));
  }
  Matrix out(1, 1);
  out(0, 0) = static_cast<float>(loss / static_cast<double>(m));
  std::vector<float> t(targets.begin(), targets.end());
  return make_op(std::move(out), {logits}, [t = std::move(t)](Node& self) {
    Node& p = parent(self, 0);
    Matrix g(p.value.rows(), 1);
    for (Index k = 0; k < g.rows(); ++k) {
      const float s = 1.0f / (1.0f + std::exp(-p.value(k, 0)));
      g(k, 0) = (s - t[static_cast<std::size_t>(k)]) * self.grad(0, 0) / static_cast<float>(t.size());
    }
    p.accumulate(g);
  });
}

}  // namespace gnncomp::ad
