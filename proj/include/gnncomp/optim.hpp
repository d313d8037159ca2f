#pragma once

#include <unordered_map>
#include <vector>

#include "gnncomp/module.hpp"

namespace gnncomp {

struct OptimConfig {
  float lr = 0.01f;
  float weight_decay = 0.0f;  // L2 rate, added to the gradient as lambda * w
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  int max_epochs = 200;

  void validate() const;
};

struct AdamMoments {
  Matrix m;
  Matrix v;
};

/// One Adam update with bias correction at 1-based `step`. Prunable
/// parameters receive the L2 term; masked entries are re-zeroed afterwards.
/// Parameters whose gradient holds a NaN are left unchanged; the number of
/// such parameters is returned.
int adam_step(std::vector<Parameter*>& params, std::vector<AdamMoments>& moments,
              const OptimConfig& config, int step, float lr);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, OptimConfig config);

  /// Extra parameters updated with their own learning rate and no L2 term.
  void add_group(std::vector<Parameter*> params, float lr);

  void step();
  void zero_grad();
  int steps_taken() const { return step_; }
  int nan_skipped() const { return nan_skipped_; }
  const OptimConfig& config() const { return config_; }
  void set_lr(float lr) { config_.lr = lr; }

 private:
  struct Group {
    std::vector<Parameter*> params;
    std::vector<AdamMoments> moments;
    float lr = 0;
    bool own_lr = false;
  };
  std::vector<Group> groups_;
  OptimConfig config_;
  int step_ = 0;
  int nan_skipped_ = 0;
};

}  // namespace gnncomp
