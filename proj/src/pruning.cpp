#include "gnncomp/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace gnncomp {

std::string to_string(PruneMethod method) {
  return method == PruneMethod::Global ? "global" : "layerwise";
}

PruneMethod prune_method_from_string(const std::string& s) {
  if (s == "global") return PruneMethod::Global;
  if (s == "layerwise" || s == "layer-wise" || s == "layer_wise") return PruneMethod::LayerWise;
  throw Error("unknown pruning method: " + s);
}

Index PruneMask::total() const {
  Index n = 0;
  for (const auto& [name, m] : masks) n += m.size();
  return n;
}

Index PruneMask::pruned() const {
  Index n = 0;
  for (const auto& [name, m] : masks) n += m.size() - m.count();
  return n;
}

std::vector<std::string> prunable_names(const Module& module) {
  std::vector<std::string> names;
  for (const auto& p : module.parameters()) {
    if (p.prunable) names.push_back(p.name);
  }
  return names;
}

namespace {

void check_sparsity(double s) {
  if (!(s >= 0.0 && s < 1.0)) throw Error("pruning: sparsity must lie in [0, 1)");
}

struct Candidate {
  float magnitude;
  std::size_t tensor;
  Index flat;
};

bool smaller(const Candidate& a, const Candidate& b) {
  if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
  if (a.tensor != b.tensor) return a.tensor < b.tensor;
  return a.flat < b.flat;
}

Index prune_count(double s, Index n) {
  // The epsilon keeps s*n from landing just under an integer (0.29 * 100 = 28.999...).
  return static_cast<Index>(std::floor(s * static_cast<double>(n) + 1e-9));
}

// Marks the k smallest candidates as pruned.
void prune_smallest(std::vector<Candidate>& cands, Index k, std::vector<BoolMatrix*>& masks) {
  if (k <= 0) return;
  const auto kth = cands.begin() + k;
  // Strict total order, so the first k after partitioning are exactly the k smallest.
  if (kth != cands.end()) std::nth_element(cands.begin(), kth, cands.end(), smaller);
  for (auto it = cands.begin(); it != kth; ++it) masks[it->tensor]->data()[it->flat] = false;
}

std::vector<Candidate> candidates_of(const Tensor& t, std::size_t tensor_index) {
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(t.numel()));
  for (Index i = 0; i < t.numel(); ++i) {
    float m = std::abs(t.data[i]);
    if (std::isnan(m)) m = std::numeric_limits<float>::infinity();
    out.push_back({m, tensor_index, i});
  }
  return out;
}

PruneMask make_full_mask(const ModelState& state, std::span<const std::string> prunable, double s,
                         PruneMethod method, std::vector<BoolMatrix*>& slots) {
  PruneMask mask;
  mask.target_sparsity = s;
  mask.method = method;
  for (const auto& name : prunable) {
    const Tensor& t = state.at(name);
    const Matrix shaped = t.as_matrix();
    auto [it, inserted] = mask.masks.emplace(name, BoolMatrix::Constant(shaped.rows(), shaped.cols(), true));
    if (!inserted) throw Error("pruning: duplicate prunable name " + name);
    slots.push_back(&it->second);
  }
  return mask;
}

}  // namespace

PruneMask global_magnitude_prune(const ModelState& state, std::span<const std::string> prunable, double s) {
  check_sparsity(s);
  std::vector<BoolMatrix*> slots;
  PruneMask mask = make_full_mask(state, prunable, s, PruneMethod::Global, slots);
  std::vector<Candidate> pool;
  for (std::size_t i = 0; i < prunable.size(); ++i) {
    auto c = candidates_of(state.at(prunable[i]), i);
    pool.insert(pool.end(), c.begin(), c.end());
  }
  prune_smallest(pool, prune_count(s, static_cast<Index>(pool.size())), slots);
  return mask;
}

PruneMask layerwise_magnitude_prune(const ModelState& state, std::span<const std::string> prunable, double s) {
  check_sparsity(s);
  std::vector<BoolMatrix*> slots;
  PruneMask mask = make_full_mask(state, prunable, s, PruneMethod::LayerWise, slots);
  for (std::size_t i = 0; i < prunable.size(); ++i) {
    auto c = candidates_of(state.at(prunable[i]), i);
    prune_smallest(c, prune_count(s, static_cast<Index>(c.size())), slots);
  }
  return mask;
}

PruneMask global_magnitude_prune(const Module& module, double s) {
  const auto names = prunable_names(module);
  return global_magnitude_prune(module.state(), names, s);
}

PruneMask layerwise_magnitude_prune(const Module& module, double s) {
  const auto names = prunable_names(module);
  return layerwise_magnitude_prune(module.state(), names, s);
}

PruneMask magnitude_prune(const Module& module, PruneMethod method, double s) {
  return method == PruneMethod::Global ? global_magnitude_prune(module, s) : layerwise_magnitude_prune(module, s);
}

void apply_mask(Module& module, const PruneMask& mask) {
  for (const auto& [name, m] : mask.masks) {
    Parameter& p = module.parameter(name);
    if (!p.prunable) throw Error("apply_mask: parameter " + name + " is not prunable");
    const Matrix& w = p.var.value();
    if (m.rows() != w.rows() || m.cols() != w.cols()) throw ShapeError("apply_mask: mask shape mismatch for " + name);
    p.mask = m;
    p.apply_mask();
  }
}

TrainResult fine_tune(GnnModel& model, const PruneMask& mask, const Dataset& ds, const Split& split,
                      const TrainOptions& base, const FineTuneOptions& ft) {
  apply_mask(model, mask);
  TrainOptions options = base;
  options.optim.lr = base.optim.lr * ft.lr_scale;
  options.optim.max_epochs = ft.epochs;
  return train(model, ds, split, options);
}

double SparsityReport::global_fraction() const {
  return prunable_total == 0 ? 0.0 : static_cast<double>(prunable_zeros) / static_cast<double>(prunable_total);
}

double SparsityReport::overall_fraction() const {
  return all_total == 0 ? 0.0 : static_cast<double>(all_zeros) / static_cast<double>(all_total);
}

SparsityReport sparsity_report(const Module& module) {
  SparsityReport r;
  for (const auto& p : module.parameters()) {
    const Matrix& w = p.var.value();
    const Index zeros = (w.array() == 0.0f).count();
    r.all_zeros += zeros;
    r.all_total += w.size();
    if (!p.prunable) continue;
    r.layers.push_back({p.name, zeros, w.size()});
    r.prunable_zeros += zeros;
    r.prunable_total += w.size();
  }
  return r;
}

void write_sparsity_csv(const SparsityReport& report, std::ostream& out) {
  out << "layer,zeros,total,fraction\n";
  for (const auto& l : report.layers) out << l.name << ',' << l.zeros << ',' << l.total << ',' << l.fraction() << '\n';
  out << "global," << report.prunable_zeros << ',' << report.prunable_total << ',' << report.global_fraction() << '\n';
}

const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g{0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
    for (int k = 1; k <= 9; ++k) g.push_back(k / 10.0);
    g.insert(g.end(), {1.0, 1e2, 1e3, 1e6});
    return g;
  }();
  return grid;
}

std::vector<RegularizationRecord> regularization_sweep(const ModelFactory& factory, const Dataset& ds,
                                                       const Split& split, std::span<const double> lambdas,
                                                       const TrainOptions& base) {
  std::vector<RegularizationRecord> out;
  for (double lambda : lambdas) {
    RegularizationRecord rec;
    rec.lambda = lambda;
    try {
      auto model = factory();
      TrainOptions options = base;
      options.optim.weight_decay = static_cast<float>(lambda);
      rec.result = train(*model, ds, split, options);
      rec.failed = rec.result.diverged;
      if (rec.failed) rec.error = "diverged";
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

double lottery_round_rate(double s_final, int rounds) {
  if (rounds < 1) throw Error("lottery ticket: rounds must be >= 1");
  if (!(s_final >= 0.0 && s_final < 1.0)) throw Error("lottery ticket: final sparsity must lie in [0, 1)");
  return 1.0 - std::pow(1.0 - s_final, 1.0 / rounds);
}

LotteryResult lottery_ticket_experiment(const ModelFactory& factory, const Dataset& ds, const Split& split,
                                        double s_final, int rounds, const TrainOptions& base,
                                        const FineTuneOptions& ft) {
  LotteryResult out;
  out.round_rate = lottery_round_rate(s_final, rounds);

  auto dense = factory();
  const ModelState init = dense->state();
  out.dense_acc = train(*dense, ds, split, base).test_metric;

  auto ticket = factory();
  ticket->load_state(dense->state());
  for (int k = 1; k <= rounds; ++k) {
    // Cumulative target after k rounds; already-pruned zeros are the smallest
    // magnitudes, so each round removes r of what survived.
    const double s_k = k == rounds ? s_final : 1.0 - std::pow(1.0 - out.round_rate, k);
    const PruneMask mask = global_magnitude_prune(*ticket, s_k);
    ticket->clear_masks();
    ticket->load_state(init);
    apply_mask(*ticket, mask);
    out.winning_ticket_acc = train(*ticket, ds, split, base).test_metric;
  }
  out.achieved_sparsity = sparsity_report(*ticket).global_fraction();

  const PruneMask one_shot = global_magnitude_prune(*dense, s_final);
  out.finetune_acc = fine_tune(*dense, one_shot, ds, split, base, ft).test_metric;
  return out;
}

}  // namespace gnncomp
