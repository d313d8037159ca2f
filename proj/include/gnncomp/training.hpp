#pragma once

#include <functional>
#include <vector>

#include "gnncomp/models.hpp"

namespace gnncomp {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_metric = 0;
};

struct TrainOptions {
  OptimConfig optim;
  std::uint64_t seed = 0;
  ForwardHooks* hooks = nullptr;
  /// Invoked after every epoch (used to assert mask invariants).
  std::function<void(int epoch, GnnModel& model)> on_epoch_end;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_val = -1;
  int best_epoch = -1;
  double test_metric = 0;
  double train_seconds = 0;
  bool diverged = false;
  ModelState best_state;
};

/// Trains for `optim.max_epochs`, keeping the best-validation state, which is
/// loaded back into `model` before returning. A NaN loss stops training and
/// sets `diverged`. Deterministic for a fixed seed.
TrainResult train(GnnModel& model, const Dataset& ds, const Split& split, const TrainOptions& options);

/// Test-split metric of the model as it stands (eval mode).
double evaluate_test(GnnModel& model, const Dataset& ds, const Split& split, ForwardHooks* hooks = nullptr);

}  // namespace gnncomp
