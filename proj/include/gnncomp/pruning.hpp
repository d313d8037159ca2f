#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gnncomp/training.hpp"

namespace gnncomp {

enum class PruneMethod { Global, LayerWise };

std::string to_string(PruneMethod method);
PruneMethod prune_method_from_string(const std::string& s);

/// Kept/pruned partition of the prunable parameters (true = kept).
struct PruneMask {
  std::map<std::string, BoolMatrix> masks;
  double target_sparsity = 0.0;
  PruneMethod method = PruneMethod::Global;

  Index total() const;
  Index pruned() const;
};

/// Names of the prunable parameters in registration order.
std::vector<std::string> prunable_names(const Module& module);

/// Masks exactly floor(s * N) entries with the smallest |w| pooled over all
/// `prunable` tensors. Ties are broken by (position in `prunable`, flat index).
PruneMask global_magnitude_prune(const ModelState& state, std::span<const std::string> prunable, double s);
PruneMask global_magnitude_prune(const Module& module, double s);

/// Same selection rule applied to each tensor on its own: floor(s * n_l) per tensor.
PruneMask layerwise_magnitude_prune(const ModelState& state, std::span<const std::string> prunable, double s);
PruneMask layerwise_magnitude_prune(const Module& module, double s);

PruneMask magnitude_prune(const Module& module, PruneMethod method, double s);

/// Zeroes masked weights and stores the mask on each parameter so that every
/// optimizer step re-pins them. Throws on names that are unknown or not prunable.
void apply_mask(Module& module, const PruneMask& mask);

struct FineTuneOptions {
  int epochs = 50;
  float lr_scale = 0.5f;
};

/// Applies `mask` and continues training from the current weights.
TrainResult fine_tune(GnnModel& model, const PruneMask& mask, const Dataset& ds, const Split& split,
                      const TrainOptions& base, const FineTuneOptions& ft = {});

struct LayerSparsity {
  std::string name;
  Index zeros = 0;
  Index total = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total); }
};

struct SparsityReport {
  std::vector<LayerSparsity> layers;  // prunable parameters
  Index prunable_zeros = 0;
  Index prunable_total = 0;
  Index all_zeros = 0;
  Index all_total = 0;

  double global_fraction() const;
  double overall_fraction() const;
};

/// Exact zero counts (-0.0 counts as zero) over the module's parameters.
SparsityReport sparsity_report(const Module& module);
/// `layer,zeros,total,fraction` with a trailing `global` row.
void write_sparsity_csv(const SparsityReport& report, std::ostream& out);

using ModelFactory = std::function<std::unique_ptr<GnnModel>()>;

const std::vector<double>& default_lambda_grid();

struct RegularizationRecord {
  double lambda = 0;
  TrainResult result;
  bool failed = false;
  std::string error;
};

/// One freshly initialised model per lambda, trained with L2 rate lambda.
std::vector<RegularizationRecord> regularization_sweep(const ModelFactory& factory, const Dataset& ds,
                                                       const Split& split, std::span<const double> lambdas,
                                                       const TrainOptions& base);

/// Per-round pruning rate r with (1 - r)^rounds = 1 - s_final.
double lottery_round_rate(double s_final, int rounds);

struct LotteryResult {
  double winning_ticket_acc = 0;
  double finetune_acc = 0;
  double dense_acc = 0;
  double round_rate = 0;
  double achieved_sparsity = 0;
};

/// Iterative magnitude pruning with rewinding to the initial weights, compared
/// against one-shot pruning + fine-tuning of the dense model.
LotteryResult lottery_ticket_experiment(const ModelFactory& factory, const Dataset& ds, const Split& split,
                                        double s_final, int rounds, const TrainOptions& base,
                                        const FineTuneOptions& ft = {});

}  // namespace gnncomp
