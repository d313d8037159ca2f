#include "gnncomp/module.hpp"

namespace gnncomp {

void Parameter::apply_mask() {
  if (!mask) return;
  Matrix& v = var.mutable_value();
  if (mask->rows() != v.rows() || mask->cols() != v.cols()) {
    throw ShapeError("mask shape mismatch for " + name);
  }
  v = mask->select(v, Matrix::Zero(v.rows(), v.cols()));
}

Parameter& Module::parameter(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw Error("unknown parameter " + std::string(name));
}

const Parameter* Module::find_parameter(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter& Module::register_parameter(std::string name, Matrix init, std::vector<Index> shape, bool prunable) {
  if (find_parameter(name)) throw Error("duplicate parameter " + name);
  if (shape_numel(shape) != init.size()) throw ShapeError("parameter " + name + ": shape/data mismatch");
  Parameter p;
  p.name = std::move(name);
  p.var = ad::leaf(std::move(init));
  p.shape = std::move(shape);
  p.prunable = prunable;
  params_.push_back(std::move(p));
  return params_.back();
}

void Module::register_buffer(std::string name, Matrix* value, std::vector<Index> shape) {
  buffers_.push_back({std::move(name), value, std::move(shape)});
}

ModelState Module::state() const {
  ModelState s;
  for (const auto& p : params_) s.insert(p.name, p.to_tensor());
  for (const auto& b : buffers_) s.insert(b.name, Tensor::from_matrix(*b.value, b.shape));
  return s;
}

void Module::load_state(const ModelState& state) {
  auto fetch = [&](const std::string& name, const std::vector<Index>& shape, Matrix& dst) {
    const Tensor& t = state.at(name);
    if (t.shape != shape) throw ShapeError("load_state: shape mismatch for " + name);
    const Index rows = dst.rows();
    const Index cols = dst.cols();
    dst = Eigen::Map<const Matrix>(t.data.data(), rows, cols);
  };
  for (auto& p : params_) {
    fetch(p.name, p.shape, p.var.mutable_value());
    p.apply_mask();
  }
  for (auto& b : buffers_) fetch(b.name, b.shape, *b.value);
}

void Module::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

Index Module::parameter_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.numel();
  return n;
}

void Module::clear_masks() {
  for (auto& p : params_) p.mask.reset();
}

}  // namespace gnncomp
