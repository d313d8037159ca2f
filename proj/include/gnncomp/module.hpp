#pragma once

#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gnncomp/autodiff.hpp"
#include "gnncomp/tensor.hpp"

namespace gnncomp {

using BoolMatrix = MatrixX<bool>;

/// A named trainable tensor. Weight matrices are prunable; biases and norm
/// parameters are not. When a mask is present, masked entries stay zero.
struct Parameter {
  std::string name;
  ad::Var var;
  std::vector<Index> shape;
  bool prunable = false;
  bool weight_decay = true;  // L2 applies only when prunable && weight_decay
  std::optional<BoolMatrix> mask;

  Index numel() const { return var.value().size(); }
  void apply_mask();
  Tensor to_tensor() const { return Tensor::from_matrix(var.value(), shape); }
};

/// Non-trainable state that still belongs in checkpoints (batch-norm stats).
struct Buffer {
  std::string name;
  Matrix* value = nullptr;
  std::vector<Index> shape;
};

/// Owns parameters in registration order. Registration order defines
/// ModelState order and pruning tie-breaks.
class Module {
 public:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  std::deque<Parameter>& parameters() { return params_; }
  const std::deque<Parameter>& parameters() const { return params_; }
  Parameter& parameter(std::string_view name);
  const Parameter* find_parameter(std::string_view name) const;

  ModelState state() const;
  /// Copies values by name; every parameter and buffer must be present with
  /// matching shape. Masks are left untouched and re-applied.
  void load_state(const ModelState& state);

  void zero_grad();
  Index parameter_count() const;
  void clear_masks();

 protected:
  Parameter& register_parameter(std::string name, Matrix init, std::vector<Index> shape, bool prunable);
  void register_buffer(std::string name, Matrix* value, std::vector<Index> shape);

 private:
  std::deque<Parameter> params_;
  std::vector<Buffer> buffers_;
};

}  // namespace gnncomp
