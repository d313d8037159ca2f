#include "gnncomp/training.hpp"

#include <chrono>
#include <cmath>

namespace gnncomp {

TrainResult train(GnnModel& model, const Dataset& ds, const Split& split, const TrainOptions& options) {
  if (task_for(model.kind()) != ds.task) throw Error("train: model kind does not match dataset task");
  const auto start = std::chrono::steady_clock::now();
  model.prepare(ds, split);
  if (options.hooks) options.hooks->attach(model, ds, split);

  std::vector<Parameter*> params;
  for (auto& p : model.parameters()) params.push_back(&p);
  Adam opt(params, options.optim);
  if (options.hooks) {
    auto extra = options.hooks->extra_parameters();
    if (!extra.empty()) opt.add_group(std::move(extra), options.hooks->extra_lr());
  }

  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  ForwardContext ctx{true, &rng, options.hooks};

  TrainResult result;
  for (int epoch = 1; epoch <= options.optim.max_epochs; ++epoch) {
    const double loss = model.train_epoch(ds, split, opt, ctx);
    if (!std::isfinite(loss)) {
      result.diverged = true;
      result.history.push_back({epoch, loss, 0.0});
      break;
    }
    const double val = model.evaluate(ds, split, SplitPart::Val, ctx);
    result.history.push_back({epoch, loss, val});
    if (val > result.best_val) {
      result.best_val = val;
      result.best_epoch = epoch;
      result.best_state = model.state();
    }
    if (options.on_epoch_end) options.on_epoch_end(epoch, model);
  }
  if (result.best_epoch > 0) model.load_state(result.best_state);
  result.test_metric = model.evaluate(ds, split, SplitPart::Test, ctx);
  result.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double evaluate_test(GnnModel& model, const Dataset& ds, const Split& split, ForwardHooks* hooks) {
  model.prepare(ds, split);
  if (hooks) hooks->attach(model, ds, split);
  ForwardContext ctx{false, nullptr, hooks};
  return model.evaluate(ds, split, SplitPart::Test, ctx);
}

}  // namespace gnncomp
