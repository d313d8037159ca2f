#include "gnncomp/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace gnncomp {

namespace {

Matrix glorot(Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  std::uniform_real_distribution<float> u(-a, a);
  Matrix w(fan_in, fan_out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  return w;
}

ad::Var hooked_weight(const Parameter& p, ForwardContext& ctx) {
  return ctx.hooks ? ctx.hooks->weight(p.name, p.var, ctx.train) : p.var;
}

ad::Var hooked_activation(const std::string& site, const ad::Var& x, bool node_level, ForwardContext& ctx) {
  return ctx.hooks ? ctx.hooks->activation(site, x, node_level, ctx.train) : x;
}

ad::Var linear(const ad::Var& x, const DenseLayer& layer, ForwardContext& ctx) {
  return ad::add_bias(ad::matmul(x, hooked_weight(*layer.weight, ctx)), layer.bias->var);
}

/// Adds any hook penalty, back-propagates, steps the optimizer.
double optimizer_step(ad::Var loss, Adam& opt, ForwardContext& ctx) {
  if (ctx.hooks) {
    if (auto pen = ctx.hooks->penalty()) loss = ad::add(loss, pen);
  }
  const double value = loss.item();
  ad::backward(loss);
  opt.step();
  if (ctx.hooks) ctx.hooks->after_step();
  opt.zero_grad();
  return value;
}

const std::vector<Index>& part_indices(const Split& split, SplitPart part) {
  switch (part) {
    case SplitPart::Train: return split.train;
    case SplitPart::Val: return split.val;
    case SplitPart::Test: return split.test;
  }
  return split.test;
}

double argmax_accuracy(const Matrix& logits, std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    logits.row(i).maxCoeff(&best);
    if (best == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::uint64_t pair_key(Index a, Index b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

}  // namespace

NormalizedAdjacency gcn_norm(const Graph& graph) {
  const auto deg = graph.degrees();
  std::vector<float> inv_sqrt(deg.size());
  for (std::size_t i = 0; i < deg.size(); ++i) inv_sqrt[i] = 1.0f / std::sqrt(static_cast<float>(deg[i] + 1));
  std::vector<Eigen::Triplet<float>> trip;
  trip.reserve(graph.edges.size() * 2 + static_cast<std::size_t>(graph.num_nodes));
  for (Index i = 0; i < graph.num_nodes; ++i) {
    const float s = inv_sqrt[static_cast<std::size_t>(i)];
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), s * s);
  }
  for (const auto& e : graph.edges) {
    const float w = inv_sqrt[static_cast<std::size_t>(e.src)] * inv_sqrt[static_cast<std::size_t>(e.dst)];
    trip.emplace_back(static_cast<int>(e.src), static_cast<int>(e.dst), w);
    trip.emplace_back(static_cast<int>(e.dst), static_cast<int>(e.src), w);
  }
  auto a = std::make_shared<CsrMatrix>(graph.num_nodes, graph.num_nodes);
  a->setFromTriplets(trip.begin(), trip.end());
  return {std::move(a)};
}

ad::Var gcn_forward(const ad::Var& x, const NormalizedAdjacency& adj, std::span<const DenseLayer> layers,
                    float dropout, ForwardContext& ctx, const std::string& prefix) {
  if (x.rows() != adj.csr->rows()) throw ShapeError("gcn_forward: feature rows do not match adjacency");
  ad::Var h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = ad::matmul(h, hooked_weight(*layers[l].weight, ctx));
    h = ad::add_bias(ad::spmm(adj.csr, h), layers[l].bias->var);
    if (l + 1 < layers.size()) {
      h = ad::elu(h);
      if (ctx.rng) h = ad::dropout(h, dropout, ctx.train, *ctx.rng);
    }
    h = hooked_activation(prefix + std::to_string(l + 1) + ".out", h, true, ctx);
  }
  return h;
}

GinBatch make_gin_batch(std::span<const Graph* const> graphs, float eps) {
  if (graphs.empty()) throw Error("gin: empty batch");
  GinBatch b;
  b.num_graphs = static_cast<Index>(graphs.size());
  Index total = 0;
  for (const Graph* g : graphs) {
    if (g->num_nodes == 0) throw Error("gin: empty graph");
    total += g->num_nodes;
  }
  const Index dim = graphs.front()->feature_dim();
  b.features.resize(total, dim);
  b.membership.resize(static_cast<std::size_t>(total));
  std::vector<Eigen::Triplet<float>> trip;
  Index offset = 0;
  for (Index gi = 0; gi < b.num_graphs; ++gi) {
    const Graph& g = *graphs[static_cast<std::size_t>(gi)];
    b.features.middleRows(offset, g.num_nodes) = g.node_features;
    for (Index i = 0; i < g.num_nodes; ++i) {
      b.membership[static_cast<std::size_t>(offset + i)] = gi;
      if (1.0f + eps != 0.0f) trip.emplace_back(static_cast<int>(offset + i), static_cast<int>(offset + i), 1.0f + eps);
    }
    for (const auto& e : g.edges) {
      trip.emplace_back(static_cast<int>(offset + e.src), static_cast<int>(offset + e.dst), 1.0f);
      trip.emplace_back(static_cast<int>(offset + e.dst), static_cast<int>(offset + e.src), 1.0f);
    }
    b.labels.push_back(g.graph_label.value_or(0));
    b.graphs.push_back(&g);
    offset += g.num_nodes;
  }
  auto a = std::make_shared<CsrMatrix>(total, total);
  a->setFromTriplets(trip.begin(), trip.end());
  b.aggregate = std::move(a);
  return b;
}

ad::Var gin_aggregate(const ad::Var& h, const GinBatch& batch) { return ad::spmm(batch.aggregate, h); }

ad::Var gin_forward(const ad::Var& x, const GinBatch& batch, std::span<const GinLayer> layers,
                    std::span<const DenseLayer> head, float dropout, ForwardContext& ctx) {
  ad::Var h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const GinLayer& layer = layers[l];
    ad::Var t = linear(gin_aggregate(h, batch), layer.lin1, ctx);
    t = ad::batch_norm(t, layer.bn_gamma->var, layer.bn_beta->var, *layer.bn_stats, ctx.train);
    t = ad::relu(t);
    t = linear(t, layer.lin2, ctx);
    h = ad::relu(t);
    h = hooked_activation("gin" + std::to_string(l + 1) + ".out", h, true, ctx);
  }
  ad::Var g = ad::segment_sum(h, batch.membership, batch.num_graphs);
  g = hooked_activation("readout", g, false, ctx);
  for (std::size_t l = 0; l < head.size(); ++l) {
    g = linear(g, head[l], ctx);
    if (l + 1 < head.size()) {
      g = ad::relu(g);
      if (ctx.rng) g = ad::dropout(g, dropout, ctx.train, *ctx.rng);
    }
    g = hooked_activation("head.lin" + std::to_string(l + 1) + ".out", g, false, ctx);
  }
  return g;
}

float gae_link_score(const Matrix& z, Index u, Index v) {
  if (u < 0 || v < 0 || u >= z.rows() || v >= z.rows()) throw Error("gae_link_score: node index out of range");
  const float dot = z.row(u).dot(z.row(v));
  return 1.0f / (1.0f + std::exp(-dot));
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::GCN2: return "gcn2";
    case ModelKind::GIN5: return "gin5";
    case ModelKind::GAE: return "gae";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "gcn2" || s == "gcn") return ModelKind::GCN2;
  if (s == "gin5" || s == "gin") return ModelKind::GIN5;
  if (s == "gae") return ModelKind::GAE;
  throw Error("unknown model kind " + s);
}

Task task_for(ModelKind kind) {
  switch (kind) {
    case ModelKind::GCN2: return Task::NodeClassification;
    case ModelKind::GIN5: return Task::GraphClassification;
    case ModelKind::GAE: return Task::LinkPrediction;
  }
  return Task::NodeClassification;
}

ModelSpec ModelSpec::for_dataset(const Dataset& ds) {
  ModelSpec s;
  s.in_dim = ds.feature_dim();
  switch (ds.task) {
    case Task::NodeClassification:
      s.kind = ModelKind::GCN2;
      s.hidden_dim = 16;
      s.out_dim = ds.num_classes;
      s.dropout = 0.5f;
      break;
    case Task::GraphClassification:
      s.kind = ModelKind::GIN5;
      s.hidden_dim = 64;
      s.out_dim = ds.num_classes;
      s.dropout = 0.5f;
      break;
    case Task::LinkPrediction:
      s.kind = ModelKind::GAE;
      s.hidden_dim = 32;
      s.out_dim = 16;
      s.dropout = 0.0f;
      s.edge_dropout = 0.2f;
      break;
  }
  return s;
}

std::unique_ptr<GnnModel> make_model(const ModelSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::GCN2: return std::make_unique<GcnNodeClassifier>(spec, seed);
    case ModelKind::GIN5: return std::make_unique<GinGraphClassifier>(spec, seed);
    case ModelKind::GAE: return std::make_unique<GaeLinkPredictor>(spec, seed);
  }
  throw Error("make_model: unknown kind");
}

// ---------------------------------------------------------------------------
// GCN node classifier

GcnNodeClassifier::GcnNodeClassifier(ModelSpec spec, std::uint64_t seed) : GnnModel(spec) {
  std::mt19937_64 rng(seed);
  const Index h = spec.hidden_dim;
  register_parameter("conv1.weight", glorot(spec.in_dim, h, rng), {spec.in_dim, h}, true);
  register_parameter("conv1.bias", Matrix::Zero(1, h), {h}, false);
  register_parameter("conv2.weight", glorot(h, spec.out_dim, rng), {h, spec.out_dim}, true);
  register_parameter("conv2.bias", Matrix::Zero(1, spec.out_dim), {spec.out_dim}, false);
}

std::vector<DenseLayer> GcnNodeClassifier::layers() {
  auto& p = parameters();
  return {{&p[0], &p[1]}, {&p[2], &p[3]}};
}

ad::Var GcnNodeClassifier::forward(const Matrix& x, const NormalizedAdjacency& adj, ForwardContext& ctx) {
  ad::Var in = ad::constant(x);
  if (ctx.hooks && ctx.hooks->quantize_raw_input()) in = ctx.hooks->activation("input", in, true, ctx.train);
  const auto ls = layers();
  return gcn_forward(in, adj, ls, spec_.dropout, ctx);
}

void GcnNodeClassifier::prepare(const Dataset& ds, const Split&) {
  if (ds.task != Task::NodeClassification) throw Error("gcn2 expects a node classification dataset");
  adj_ = gcn_norm(ds.graphs.front());
  graph_list_ = {&ds.graphs.front()};
}

double GcnNodeClassifier::train_epoch(const Dataset& ds, const Split& split, Adam& opt, ForwardContext& ctx) {
  ctx.train = true;
  const Graph& g = ds.graphs.front();
  if (ctx.hooks) ctx.hooks->begin_batch(graph_list_, true);
  ad::Var logits = forward(g.node_features, adj_, ctx);
  std::vector<int> y;
  y.reserve(split.train.size());
  for (Index i : split.train) y.push_back(g.node_labels->at(static_cast<std::size_t>(i)));
  ad::Var loss = ad::softmax_cross_entropy(ad::gather_rows(logits, split.train), y);
  return optimizer_step(loss, opt, ctx);
}

double GcnNodeClassifier::evaluate(const Dataset& ds, const Split& split, SplitPart part, ForwardContext& ctx) {
  ctx.train = false;
  const Graph& g = ds.graphs.front();
  if (ctx.hooks) ctx.hooks->begin_batch(graph_list_, false);
  const Matrix logits = forward(g.node_features, adj_, ctx).value();
  const auto& idx = part_indices(split, part);
  Matrix sel(static_cast<Index>(idx.size()), logits.cols());
  std::vector<int> y;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    sel.row(static_cast<Index>(k)) = logits.row(idx[k]);
    y.push_back(g.node_labels->at(static_cast<std::size_t>(idx[k])));
  }
  return argmax_accuracy(sel, y);
}

// ---------------------------------------------------------------------------
// GIN graph classifier

GinGraphClassifier::GinGraphClassifier(ModelSpec spec, std::uint64_t seed) : GnnModel(spec) {
  std::mt19937_64 rng(seed);
  const Index h = spec.hidden_dim;
  // Register everything first; the deque keeps addresses stable.
  for (int l = 0; l < spec.gin_layers; ++l) {
    const std::string p = "gin" + std::to_string(l + 1);
    const Index in = l == 0 ? spec.in_dim : h;
    register_parameter(p + ".lin1.weight", glorot(in, h, rng), {in, h}, true);
    register_parameter(p + ".lin1.bias", Matrix::Zero(1, h), {h}, false);
    register_parameter(p + ".bn.weight", Matrix::Ones(1, h), {h}, false);
    register_parameter(p + ".bn.bias", Matrix::Zero(1, h), {h}, false);
    register_parameter(p + ".lin2.weight", glorot(h, h, rng), {h, h}, true);
    register_parameter(p + ".lin2.bias", Matrix::Zero(1, h), {h}, false);
    auto& stats = bn_stats_.emplace_back();
    stats.running_mean = Matrix::Zero(1, h);
    stats.running_var = Matrix::Ones(1, h);
    register_buffer(p + ".bn.running_mean", &stats.running_mean, {h});
    register_buffer(p + ".bn.running_var", &stats.running_var, {h});
  }
  register_parameter("head.lin1.weight", glorot(h, h, rng), {h, h}, true);
  register_parameter("head.lin1.bias", Matrix::Zero(1, h), {h}, false);
  register_parameter("head.lin2.weight", glorot(h, spec.out_dim, rng), {h, spec.out_dim}, true);
  register_parameter("head.lin2.bias", Matrix::Zero(1, spec.out_dim), {spec.out_dim}, false);

  auto& ps = parameters();
  for (int l = 0; l < spec.gin_layers; ++l) {
    const std::size_t o = static_cast<std::size_t>(l) * 6;
    layers_.push_back({{&ps[o], &ps[o + 1]}, &ps[o + 2], &ps[o + 3], &bn_stats_[static_cast<std::size_t>(l)], {&ps[o + 4], &ps[o + 5]}});
  }
  const std::size_t o = static_cast<std::size_t>(spec.gin_layers) * 6;
  head_ = {{&ps[o], &ps[o + 1]}, {&ps[o + 2], &ps[o + 3]}};
}

ad::Var GinGraphClassifier::forward(const GinBatch& batch, ForwardContext& ctx) {
  ad::Var x = ad::constant(batch.features);
  if (ctx.hooks && ctx.hooks->quantize_raw_input()) x = ctx.hooks->activation("input", x, true, ctx.train);
  return gin_forward(x, batch, layers_, head_, spec_.dropout, ctx);
}

void GinGraphClassifier::prepare(const Dataset& ds, const Split& split) {
  if (ds.task != Task::GraphClassification) throw Error("gin5 expects a graph classification dataset");
  for (SplitPart part : {SplitPart::Train, SplitPart::Val, SplitPart::Test}) {
    auto& out = eval_batches_[static_cast<int>(part)];
    out.clear();
    const auto& idx = part_indices(split, part);
    for (std::size_t start = 0; start < idx.size(); start += 128) {
      std::vector<const Graph*> gs;
      for (std::size_t k = start; k < std::min(idx.size(), start + 128); ++k) {
        gs.push_back(&ds.graphs[static_cast<std::size_t>(idx[k])]);
      }
      out.push_back(make_gin_batch(gs, spec_.gin_eps));
    }
  }
}

double GinGraphClassifier::train_epoch(const Dataset& ds, const Split& split, Adam& opt, ForwardContext& ctx) {
  ctx.train = true;
  std::vector<Index> order = split.train;
  std::shuffle(order.begin(), order.end(), *ctx.rng);
  const std::size_t bs = static_cast<std::size_t>(spec_.batch_size);
  double total = 0;
  std::size_t seen = 0;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    std::vector<const Graph*> gs;
    for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k) {
      gs.push_back(&ds.graphs[static_cast<std::size_t>(order[k])]);
    }
    // A lone single-node graph gives degenerate batch statistics; skip it.
    if (gs.size() == 1 && gs.front()->num_nodes == 1) continue;
    GinBatch batch = make_gin_batch(gs, spec_.gin_eps);
    if (ctx.hooks) ctx.hooks->begin_batch(batch.graphs, true);
    ad::Var loss = ad::softmax_cross_entropy(forward(batch, ctx), batch.labels);
    total += optimizer_step(loss, opt, ctx) * static_cast<double>(gs.size());
    seen += gs.size();
  }
  return seen ? total / static_cast<double>(seen) : 0.0;
}

double GinGraphClassifier::evaluate(const Dataset&, const Split&, SplitPart part, ForwardContext& ctx) {
  ctx.train = false;
  std::size_t correct = 0, count = 0;
  for (const auto& batch : eval_batches_[static_cast<int>(part)]) {
    if (ctx.hooks) ctx.hooks->begin_batch(batch.graphs, false);
    const Matrix logits = forward(batch, ctx).value();
    for (Index i = 0; i < logits.rows(); ++i) {
      Index best = 0;
      logits.row(i).maxCoeff(&best);
      correct += best == batch.labels[static_cast<std::size_t>(i)];
    }
    count += static_cast<std::size_t>(logits.rows());
  }
  return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0;
}

// ---------------------------------------------------------------------------
// GAE link predictor

GaeLinkPredictor::GaeLinkPredictor(ModelSpec spec, std::uint64_t seed) : GnnModel(spec) {
  std::mt19937_64 rng(seed);
  const Index h = spec.hidden_dim;
  register_parameter("encoder.conv1.weight", glorot(spec.in_dim, h, rng), {spec.in_dim, h}, true);
  register_parameter("encoder.conv1.bias", Matrix::Zero(1, h), {h}, false);
  register_parameter("encoder.conv2.weight", glorot(h, spec.out_dim, rng), {h, spec.out_dim}, true);
  register_parameter("encoder.conv2.bias", Matrix::Zero(1, spec.out_dim), {spec.out_dim}, false);
}

void GaeLinkPredictor::prepare(const Dataset& ds, const Split& split) {
  if (ds.task != Task::LinkPrediction) throw Error("gae expects a link prediction dataset");
  const Graph& g = ds.graphs.front();
  Graph train_graph;
  train_graph.num_nodes = g.num_nodes;
  train_pairs_.clear();
  train_edge_keys_.clear();
  for (Index e : split.train) {
    const Edge& edge = g.edges[static_cast<std::size_t>(e)];
    train_graph.edges.push_back(edge);
    train_pairs_.emplace_back(edge.src, edge.dst);
    train_edge_keys_.push_back(pair_key(edge.src, edge.dst));
  }
  std::sort(train_edge_keys_.begin(), train_edge_keys_.end());
  adj_ = gcn_norm(train_graph);
  graph_list_ = {&g};
}

ad::Var GaeLinkPredictor::encode(const Matrix& x, const NormalizedAdjacency& adj, ForwardContext& ctx) {
  ad::Var in = ad::constant(x);
  if (ctx.hooks && ctx.hooks->quantize_raw_input()) in = ctx.hooks->activation("input", in, true, ctx.train);
  auto& p = parameters();
  const DenseLayer ls[2] = {{&p[0], &p[1]}, {&p[2], &p[3]}};
  return gcn_forward(in, adj, ls, spec_.dropout, ctx, "encoder.conv");
}

double GaeLinkPredictor::train_epoch(const Dataset& ds, const Split&, Adam& opt, ForwardContext& ctx) {
  ctx.train = true;
  const Graph& g = ds.graphs.front();
  if (ctx.hooks) ctx.hooks->begin_batch(graph_list_, true);
  std::vector<std::pair<Index, Index>> pairs;
  NormalizedAdjacency adj = adj_;
  if (spec_.edge_dropout > 0.0f) {
    std::bernoulli_distribution held_out(spec_.edge_dropout);
    Graph visible;
    visible.num_nodes = g.num_nodes;
    for (const auto& [a, b] : train_pairs_) {
      if (held_out(*ctx.rng)) {
        pairs.emplace_back(a, b);
      } else {
        visible.edges.push_back({a, b});
      }
    }
    adj = gcn_norm(visible);
  } else {
    pairs = train_pairs_;
  }
  ad::Var z = encode(g.node_features, adj, ctx);
  std::vector<float> targets(pairs.size(), 1.0f);
  std::uniform_int_distribution<Index> pick(0, g.num_nodes - 1);
  const std::size_t positives = pairs.size();
  while (pairs.size() < 2 * positives) {
    const Index a = pick(*ctx.rng), b = pick(*ctx.rng);
    if (a == b || std::binary_search(train_edge_keys_.begin(), train_edge_keys_.end(), pair_key(a, b))) continue;
    pairs.emplace_back(a, b);
    targets.push_back(0.0f);
  }
  ad::Var loss = ad::bce_with_logits(ad::pair_dot(z, pairs), targets);
  return optimizer_step(loss, opt, ctx);
}

namespace {

void eval_pairs(const Dataset& ds, const Split& split, SplitPart part,
                std::vector<std::pair<Index, Index>>& pairs, std::vector<float>& targets) {
  const Graph& g = ds.graphs.front();
  const auto& idx = part_indices(split, part);
  for (Index e : idx) {
    pairs.emplace_back(g.edges[static_cast<std::size_t>(e)].src, g.edges[static_cast<std::size_t>(e)].dst);
    targets.push_back(1.0f);
  }
  const std::vector<Edge>* negs = part == SplitPart::Val ? &split.val_negatives
                                  : part == SplitPart::Test ? &split.test_negatives
                                                            : nullptr;
  if (negs) {
    for (const auto& e : *negs) {
      pairs.emplace_back(e.src, e.dst);
      targets.push_back(0.0f);
    }
  }
}

}  // namespace

double GaeLinkPredictor::evaluate(const Dataset& ds, const Split& split, SplitPart part, ForwardContext& ctx) {
  ctx.train = false;
  if (ctx.hooks) ctx.hooks->begin_batch(graph_list_, false);
  const Matrix z = encode(ds.graphs.front().node_features, ctx).value();
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<float> targets;
  eval_pairs(ds, split, part, pairs, targets);
  if (pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const bool positive = gae_link_score(z, pairs[k].first, pairs[k].second) >= 0.5f;
    correct += positive == (targets[k] > 0.5f);
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double GaeLinkPredictor::auc(const Dataset& ds, const Split& split, SplitPart part) {
  ForwardContext ctx;
  const Matrix z = encode(ds.graphs.front().node_features, ctx).value();
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<float> targets;
  eval_pairs(ds, split, part, pairs, targets);
  std::vector<std::pair<float, float>> scored;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    scored.emplace_back(gae_link_score(z, pairs[k].first, pairs[k].second), targets[k]);
  }
  std::sort(scored.begin(), scored.end());
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t k = 0; k < scored.size(); ++k) {
    if (scored[k].second > 0.5f) {
      pos += 1;
      rank_sum += static_cast<double>(k + 1);
    } else {
      neg += 1;
    }
  }
  if (pos == 0 || neg == 0) return 0.5;
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

}  // namespace gnncomp
