#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gnncomp/graph.hpp"
#include "gnncomp/module.hpp"
#include "gnncomp/optim.hpp"

namespace gnncomp {

class GnnModel;

/// Interception points used by quantization-aware training. A model calls
/// `weight` on every weight matrix it uses and `activation` on layer outputs.
/// `node_level` marks activations whose rows are the nodes of the current batch.
class ForwardHooks {
 public:
  virtual ~ForwardHooks() = default;
  /// Called once the model is prepared for a dataset, before the optimizer exists.
  virtual void attach(GnnModel& /*model*/, const Dataset& /*ds*/, const Split& /*split*/) {}
  virtual ad::Var weight(const std::string& site, const ad::Var& w, bool train) = 0;
  virtual ad::Var activation(const std::string& site, const ad::Var& x, bool node_level, bool train) = 0;
  /// Called before each training forward with the graphs making up the batch.
  virtual void begin_batch(std::span<const Graph* const> graphs, bool train) = 0;
  /// Extra loss term (A2Q memory penalty); an empty Var when absent.
  virtual ad::Var penalty() { return {}; }
  /// Parameters owned by the hooks (A2Q bit-widths) and their learning rate.
  virtual std::vector<Parameter*> extra_parameters() { return {}; }
  virtual float extra_lr() const { return 0.0f; }
  virtual void after_step() {}
  virtual bool quantize_raw_input() const { return false; }
};

struct ForwardContext {
  bool train = false;
  std::mt19937_64* rng = nullptr;
  ForwardHooks* hooks = nullptr;
};

/// D^-1/2 (A + I) D^-1/2 with D the degree of A + I.
struct NormalizedAdjacency {
  std::shared_ptr<const CsrMatrix> csr;
};

NormalizedAdjacency gcn_norm(const Graph& graph);

struct DenseLayer {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
};

/// Layer l: A·(H·W_l) + b_l; ELU then dropout between layers, nothing after the last.
ad::Var gcn_forward(const ad::Var& x, const NormalizedAdjacency& adj, std::span<const DenseLayer> layers,
                    float dropout, ForwardContext& ctx, const std::string& prefix = "conv");

/// Block-diagonal batch of graphs for GIN: aggregation matrix A + (1+eps)I,
/// node -> graph membership, stacked features.
struct GinBatch {
  std::shared_ptr<const CsrMatrix> aggregate;
  std::vector<Index> membership;
  Index num_graphs = 0;
  Matrix features;
  std::vector<int> labels;
  std::vector<const Graph*> graphs;
};

GinBatch make_gin_batch(std::span<const Graph* const> graphs, float eps);

/// (1 + eps)·h_v + sum of neighbour rows, without the MLP.
ad::Var gin_aggregate(const ad::Var& h, const GinBatch& batch);

struct GinLayer {
  DenseLayer lin1;
  Parameter* bn_gamma = nullptr;
  Parameter* bn_beta = nullptr;
  ad::BatchNormStats* bn_stats = nullptr;
  DenseLayer lin2;
};

/// GIN stack (Linear→BatchNorm→ReLU→Linear per layer, ReLU between layers),
/// sum readout, two-layer classifier head. Returns [num_graphs x classes].
ad::Var gin_forward(const ad::Var& x, const GinBatch& batch, std::span<const GinLayer> layers,
                    std::span<const DenseLayer> head, float dropout, ForwardContext& ctx);

/// sigmoid(z_u · z_v); throws when u or v is out of range.
float gae_link_score(const Matrix& z, Index u, Index v);

enum class ModelKind { GCN2, GIN5, GAE };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelSpec {
  ModelKind kind = ModelKind::GCN2;
  Index in_dim = 0;
  Index hidden_dim = 16;
  Index out_dim = 0;  // classes, or embedding width for GAE
  float dropout = 0.5f;
  float gin_eps = 0.0f;
  int gin_layers = 5;
  int batch_size = 32;
  /// GAE: fraction of training edges withheld from message passing each
  /// epoch and used as that epoch's positive targets (0 = use all edges).
  float edge_dropout = 0.0f;

  /// Table-3 style defaults for the dataset's task.
  static ModelSpec for_dataset(const Dataset& ds);
};

enum class SplitPart { Train, Val, Test };

/// A task model: owns parameters and knows how to train/evaluate itself on a
/// dataset split. Metrics are accuracies (thresholded at 0.5 for links).
class GnnModel : public Module {
 public:
  explicit GnnModel(ModelSpec spec) : spec_(spec) {}
  const ModelSpec& spec() const { return spec_; }
  ModelKind kind() const { return spec_.kind; }

  /// Caches adjacency/batches for this dataset and split.
  virtual void prepare(const Dataset& ds, const Split& split) = 0;
  /// One pass over the training data with optimizer steps; returns mean loss.
  virtual double train_epoch(const Dataset& ds, const Split& split, Adam& opt, ForwardContext& ctx) = 0;
  virtual double evaluate(const Dataset& ds, const Split& split, SplitPart part, ForwardContext& ctx) = 0;

 protected:
  ModelSpec spec_;
};

std::unique_ptr<GnnModel> make_model(const ModelSpec& spec, std::uint64_t seed);

Task task_for(ModelKind kind);

// Concrete models, exposed for tests.

class GcnNodeClassifier : public GnnModel {
 public:
  GcnNodeClassifier(ModelSpec spec, std::uint64_t seed);
  void prepare(const Dataset& ds, const Split& split) override;
  double train_epoch(const Dataset& ds, const Split& split, Adam& opt, ForwardContext& ctx) override;
  double evaluate(const Dataset& ds, const Split& split, SplitPart part, ForwardContext& ctx) override;
  ad::Var forward(const Matrix& x, const NormalizedAdjacency& adj, ForwardContext& ctx);
  std::vector<DenseLayer> layers();

 private:
  NormalizedAdjacency adj_;
  std::vector<const Graph*> graph_list_;
};

class GinGraphClassifier : public GnnModel {
 public:
  GinGraphClassifier(ModelSpec spec, std::uint64_t seed);
  void prepare(const Dataset& ds, const Split& split) override;
  double train_epoch(const Dataset& ds, const Split& split, Adam& opt, ForwardContext& ctx) override;
  double evaluate(const Dataset& ds, const Split& split, SplitPart part, ForwardContext& ctx) override;
  ad::Var forward(const GinBatch& batch, ForwardContext& ctx);

 private:
  std::vector<GinLayer> layers_;
  std::vector<DenseLayer> head_;
  std::deque<ad::BatchNormStats> bn_stats_;
  std::vector<GinBatch> eval_batches_[3];
};

class GaeLinkPredictor : public GnnModel {
 public:
  GaeLinkPredictor(ModelSpec spec, std::uint64_t seed);
  void prepare(const Dataset& ds, const Split& split) override;
  double train_epoch(const Dataset& ds, const Split& split, Adam& opt, ForwardContext& ctx) override;
  double evaluate(const Dataset& ds, const Split& split, SplitPart part, ForwardContext& ctx) override;
  ad::Var encode(const Matrix& x, ForwardContext& ctx) { return encode(x, adj_, ctx); }
  ad::Var encode(const Matrix& x, const NormalizedAdjacency& adj, ForwardContext& ctx);
  /// Area under the ROC curve on a split part (diagnostic only).
  double auc(const Dataset& ds, const Split& split, SplitPart part);

 private:
  NormalizedAdjacency adj_;
  std::vector<const Graph*> graph_list_;
  std::vector<std::uint64_t> train_edge_keys_;
  std::vector<std::pair<Index, Index>> train_pairs_;
};

}  // namespace gnncomp
