#pragma once

#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gnncomp/core.hpp"

namespace gnncomp {

inline Index shape_numel(const std::vector<Index>& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

/// Row-major dense tensor of arbitrary rank.
template <typename Scalar>
struct BasicTensor {
  std::vector<Index> shape;
  VectorX<Scalar> data;

  BasicTensor() = default;
  BasicTensor(std::vector<Index> s, VectorX<Scalar> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size()) throw ShapeError("tensor: data length does not match shape");
  }

  static BasicTensor zeros(std::vector<Index> s) {
    const Index n = shape_numel(s);
    return BasicTensor(std::move(s), VectorX<Scalar>::Zero(n));
  }

  template <typename Derived>
  static BasicTensor from_matrix(const Eigen::MatrixBase<Derived>& m, std::vector<Index> s) {
    MatrixX<Scalar> rm = m;  // force row-major flattening
    return BasicTensor(std::move(s), Eigen::Map<const VectorX<Scalar>>(rm.data(), rm.size()));
  }

  Index numel() const { return data.size(); }

  /// View as rows x (numel / rows); rank-1 tensors map to a single row.
  MatrixX<Scalar> as_matrix() const {
    const Index rows = shape.size() >= 2 ? shape.front() : 1;
    const Index cols = rows == 0 ? 0 : numel() / rows;
    return Eigen::Map<const MatrixX<Scalar>>(data.data(), rows, cols);
  }
};

using Tensor = BasicTensor<float>;

/// Ordered name -> tensor map plus string metadata. Iteration follows
/// insertion (registration) order.
class ModelState {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void insert(std::string name, Tensor tensor) {
    if (contains(name)) throw Error("model state: duplicate entry " + name);
    entries_.emplace_back(std::move(name), std::move(tensor));
  }
  bool contains(const std::string& name) const { return find(name) != nullptr; }
  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : entries_) {
      if (n == name) return &t;
    }
    return nullptr;
  }
  Tensor* find(const std::string& name) {
    for (auto& [n, t] : entries_) {
      if (n == name) return &t;
    }
    return nullptr;
  }
  const Tensor& at(const std::string& name) const {
    const Tensor* t = find(name);
    if (!t) throw Error("model state: no entry " + name);
    return *t;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  std::map<std::string, std::string> metadata;

 private:
  std::vector<Entry> entries_;
};

}  // namespace gnncomp
