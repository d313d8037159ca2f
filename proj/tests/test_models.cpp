#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "gnncomp/synthetic.hpp"
#include "gnncomp/training.hpp"
#include "gnncomp/sparse_ckpt.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace gnncomp;
using gnncomp::testing::grad_check;
using gnncomp::testing::random_graph;
using gnncomp::testing::random_matrix;

namespace {

Matrix dense_norm(const Graph& g) {
  Matrix a = Matrix::Identity(g.num_nodes, g.num_nodes);
  for (const auto& e : g.edges) {
    a(e.src, e.dst) = 1;
    a(e.dst, e.src) = 1;
  }
  const Vector d = a.rowwise().sum();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) a(i, j) /= std::sqrt(d(i) * d(j));
  }
  return a;
}

Matrix elu(const Matrix& x) {
  return x.unaryExpr([](float v) { return v > 0 ? v : std::expm1(v); });
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0f); }

Parameter make_param(const std::string& name, Matrix value, bool prunable) {
  Parameter p;
  p.name = name;
  p.shape = {value.rows(), value.cols()};
  p.var = ad::leaf(std::move(value));
  p.prunable = prunable;
  return p;
}

Graph path3() {
  Graph g;
  g.num_nodes = 3;
  g.edges = {{0, 1}, {1, 2}};
  g.node_features = Matrix::Zero(3, 1);
  return g;
}

Dataset tiny_citation(std::uint64_t seed) {
  CitationConfig c;
  c.class_sizes = {40, 30, 30};
  c.num_features = 60;
  c.num_edges = 200;
  return make_citation_dataset(c, seed);
}

Dataset tiny_proteins(std::uint64_t seed) {
  ProteinConfig c;
  c.num_graphs = 60;
  c.mean_nodes = 12;
  return make_protein_dataset(c, seed);
}

}  // namespace

TEST(GcnNorm, SingleNode) {
  Graph g;
  g.num_nodes = 1;
  g.node_features = Matrix::Zero(1, 1);
  const Matrix a = Matrix(*gcn_norm(g).csr);
  EXPECT_FLOAT_EQ(a(0, 0), 1.0f);
}

TEST(GcnNorm, TwoNodesOneEdge) {
  Graph g;
  g.num_nodes = 2;
  g.edges = {{0, 1}};
  g.node_features = Matrix::Zero(2, 1);
  const Matrix a = Matrix(*gcn_norm(g).csr);
  for (Index i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(a.data()[i], 0.5f);
}

TEST(GcnNorm, PathGraph) {
  const Matrix a = Matrix(*gcn_norm(path3()).csr);
  EXPECT_NEAR(a(0, 1), 1.0 / std::sqrt(6.0), 1e-7);
  EXPECT_NEAR(a(1, 1), 1.0 / 3.0, 1e-7);
}

TEST(GcnNorm, ExhaustiveSmallRandomSuite) {
  std::mt19937_64 rng(1);
  for (Index n = 1; n <= 20; ++n) {
    for (double density : {0.0, 0.15, 0.5, 1.0}) {
      const Graph g = random_graph(n, density, 1, rng);
      const Matrix a = Matrix(*gcn_norm(g).csr);
      const Matrix ref = dense_norm(g);
      EXPECT_LE((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-7f);
      EXPECT_LE((a - ref).cwiseAbs().maxCoeff(), 1e-6f) << "n=" << n;
      for (Index i = 0; i < n; ++i) EXPECT_GT(a(i, i), 0.0f);
    }
  }
}

TEST(GcnForward, SingleNodeIdentityWeights) {
  Graph g;
  g.num_nodes = 1;
  g.node_features = Matrix::Zero(1, 2);
  Parameter w1 = make_param("w1", Matrix::Identity(2, 2), true);
  Parameter b1 = make_param("b1", Matrix::Zero(1, 2), false);
  Parameter w2 = make_param("w2", Matrix::Identity(2, 2), true);
  Parameter b2 = make_param("b2", Matrix::Zero(1, 2), false);
  const std::vector<DenseLayer> layers = {{&w1, &b1}, {&w2, &b2}};
  Matrix x(1, 2);
  x << -0.7f, 1.3f;
  ForwardContext ctx;
  const Matrix out = gcn_forward(ad::constant(x), gcn_norm(g), layers, 0.5f, ctx).value();
  const Matrix expected = elu(x);
  EXPECT_NEAR(out(0, 0), expected(0, 0), 1e-6);
  EXPECT_NEAR(out(0, 1), expected(0, 1), 1e-6);
}

TEST(GcnForward, ZeroFeaturesPropagateBiases) {
  std::mt19937_64 rng(2);
  const Graph g = random_graph(5, 0.4, 3, rng);
  Parameter w1 = make_param("w1", random_matrix(3, 4, rng), true);
  Parameter b1 = make_param("b1", random_matrix(1, 4, rng), false);
  Parameter w2 = make_param("w2", random_matrix(4, 2, rng), true);
  Parameter b2 = make_param("b2", random_matrix(1, 2, rng), false);
  const std::vector<DenseLayer> layers = {{&w1, &b1}, {&w2, &b2}};
  ForwardContext ctx;
  const Matrix out = gcn_forward(ad::constant(Matrix::Zero(5, 3)), gcn_norm(g), layers, 0.5f, ctx).value();
  const Matrix a = dense_norm(g);
  const Matrix h1 = elu(Matrix::Ones(5, 1) * b1.var.value());
  const Matrix expected = a * (h1 * w2.var.value()) + Matrix::Ones(5, 1) * b2.var.value();
  EXPECT_LE((out - expected).cwiseAbs().maxCoeff(), 1e-5f);
}

TEST(GcnForward, MatchesDenseReference) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = random_graph(5, 0.4, 6, rng);
    Parameter w1 = make_param("w1", random_matrix(6, 4, rng), true);
    Parameter b1 = make_param("b1", random_matrix(1, 4, rng), false);
    Parameter w2 = make_param("w2", random_matrix(4, 3, rng), true);
    Parameter b2 = make_param("b2", random_matrix(1, 3, rng), false);
    const std::vector<DenseLayer> layers = {{&w1, &b1}, {&w2, &b2}};
    ForwardContext ctx;
    const Matrix out = gcn_forward(ad::constant(g.node_features), gcn_norm(g), layers, 0.5f, ctx).value();
    const Matrix a = dense_norm(g);
    const Matrix h = elu(a * g.node_features * w1.var.value() + Matrix::Ones(5, 1) * b1.var.value());
    const Matrix ref = a * h * w2.var.value() + Matrix::Ones(5, 1) * b2.var.value();
    EXPECT_LE((out - ref).cwiseAbs().maxCoeff(), 1e-5f);
  }
}

TEST(GcnForward, FullLossGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const Graph g = random_graph(5, 0.5, 4, rng);
  const NormalizedAdjacency adj = gcn_norm(g);
  const std::vector<int> labels = {0, 2, 1, 1, 0};
  EXPECT_GRAD_OK(grad_check(
      [&](const std::vector<ad::Var>& v) {
        Parameter w1, b1, w2, b2;
        w1.var = v[1];
        b1.var = v[2];
        w2.var = v[3];
        b2.var = v[4];
        const std::vector<DenseLayer> layers = {{&w1, &b1}, {&w2, &b2}};
        ForwardContext ctx;
        return ad::softmax_cross_entropy(gcn_forward(v[0], adj, layers, 0.5f, ctx), labels);
      },
      {g.node_features, random_matrix(4, 3, rng), random_matrix(1, 3, rng), random_matrix(3, 3, rng),
       random_matrix(1, 3, rng)},
      5));
}

namespace {

struct GinFixture {
  std::deque<Parameter> params;
  std::deque<ad::BatchNormStats> stats;
  std::vector<GinLayer> layers;
  std::vector<DenseLayer> head;

  GinFixture(Index in, Index hidden, Index classes, int depth, std::mt19937_64& rng) {
    auto p = [&](Matrix m, bool prunable) -> Parameter* {
      params.push_back(make_param("p" + std::to_string(params.size()), std::move(m), prunable));
      return &params.back();
    };
    Index d = in;
    for (int l = 0; l < depth; ++l) {
      GinLayer layer;
      layer.lin1 = {p(random_matrix(d, hidden, rng), true), p(random_matrix(1, hidden, rng), false)};
      layer.bn_gamma = p(random_matrix(1, hidden, rng, 0.5f, 1.5f), false);
      layer.bn_beta = p(random_matrix(1, hidden, rng), false);
      stats.emplace_back();
      stats.back().running_mean = random_matrix(1, hidden, rng);
      stats.back().running_var = random_matrix(1, hidden, rng, 0.5f, 2.0f);
      layer.bn_stats = &stats.back();
      layer.lin2 = {p(random_matrix(hidden, hidden, rng), true), p(random_matrix(1, hidden, rng), false)};
      layers.push_back(layer);
      d = hidden;
    }
    head.push_back({p(random_matrix(hidden, hidden, rng), true), p(random_matrix(1, hidden, rng), false)});
    head.push_back({p(random_matrix(hidden, classes, rng), true), p(random_matrix(1, classes, rng), false)});
  }

  Matrix run(const Graph& g, float eps) {
    const Graph* gp = &g;
    const GinBatch batch = make_gin_batch(std::span<const Graph* const>(&gp, 1), eps);
    ForwardContext ctx;
    return gin_forward(ad::constant(batch.features), batch, layers, head, 0.5f, ctx).value();
  }

  // Per-node loop over neighbour lists, eval-mode batch norm.
  Matrix oracle(const Graph& g, float eps) const {
    std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(g.num_nodes));
    for (const auto& e : g.edges) {
      nbrs[e.src].push_back(e.dst);
      nbrs[e.dst].push_back(e.src);
    }
    Matrix h = g.node_features;
    for (const auto& layer : layers) {
      Matrix next(g.num_nodes, layer.lin2.weight->var.cols());
      for (Index v = 0; v < g.num_nodes; ++v) {
        Matrix agg = (1.0f + eps) * h.row(v);
        for (Index u : nbrs[static_cast<std::size_t>(v)]) agg += h.row(u);
        Matrix t = agg * layer.lin1.weight->var.value() + layer.lin1.bias->var.value();
        for (Index j = 0; j < t.cols(); ++j) {
          const float xhat = (t(0, j) - layer.bn_stats->running_mean(0, j)) /
                             std::sqrt(layer.bn_stats->running_var(0, j) + layer.bn_stats->eps);
          t(0, j) = std::max(0.0f, xhat * layer.bn_gamma->var.value()(0, j) + layer.bn_beta->var.value()(0, j));
        }
        next.row(v) = relu(t * layer.lin2.weight->var.value() + layer.lin2.bias->var.value());
      }
      h = next;
    }
    Matrix pooled = h.colwise().sum();
    pooled = relu(pooled * head[0].weight->var.value() + head[0].bias->var.value());
    return pooled * head[1].weight->var.value() + head[1].bias->var.value();
  }
};

}  // namespace

TEST(Gin, IsolatedNodeAggregatesItselfOnly) {
  Graph g;
  g.num_nodes = 1;
  g.node_features = Matrix::Constant(1, 3, 0.25f);
  const Graph* gp = &g;
  const GinBatch batch = make_gin_batch(std::span<const Graph* const>(&gp, 1), 0.0f);
  EXPECT_EQ(gin_aggregate(ad::constant(batch.features), batch).value(), g.node_features);
}

TEST(Gin, TwoNodesSumOwnAndNeighbour) {
  Graph g;
  g.num_nodes = 2;
  g.edges = {{0, 1}};
  g.node_features.resize(2, 2);
  g.node_features << 1, 2, 10, 20;
  const Graph* gp = &g;
  const GinBatch batch = make_gin_batch(std::span<const Graph* const>(&gp, 1), 0.0f);
  const Matrix h = gin_aggregate(ad::constant(batch.features), batch).value();
  EXPECT_EQ(h.row(0), h.row(1));
  EXPECT_FLOAT_EQ(h(0, 0), 11.0f);
  EXPECT_FLOAT_EQ(h(0, 1), 22.0f);
}

TEST(Gin, MatchesPerNodeOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    Graph g = random_graph(4, 0.5, 3, rng);
    GinFixture f(3, 5, 2, 3, rng);
    const float eps = trial % 2 ? 0.3f : 0.0f;
    const Matrix got = f.run(g, eps);
    const Matrix ref = f.oracle(g, eps);
    EXPECT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-5f * std::max(1.0f, ref.cwiseAbs().maxCoeff()));
  }
}

TEST(Gin, ReadoutIsPermutationInvariant) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = random_graph(7, 0.4, 3, rng);
    std::vector<Index> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Graph p;
    p.num_nodes = g.num_nodes;
    p.node_features.resize(g.num_nodes, g.feature_dim());
    for (Index v = 0; v < g.num_nodes; ++v) p.node_features.row(perm[v]) = g.node_features.row(v);
    for (const auto& e : g.edges) p.edges.push_back({perm[e.src], perm[e.dst]});
    GinFixture f(3, 6, 3, 2, rng);
    const Matrix a = f.run(g, 0.0f);
    const Matrix b = f.run(p, 0.0f);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-5f * std::max(1.0f, a.cwiseAbs().maxCoeff()));
  }
}

TEST(Gae, ScoreExamples) {
  Matrix z = Matrix::Zero(3, 2);
  EXPECT_FLOAT_EQ(gae_link_score(z, 0, 1), 0.5f);
  z.row(1) << 2, 0;
  z.row(2) << 2, 0;
  EXPECT_NEAR(gae_link_score(z, 1, 2), 0.9820, 1e-4);
  EXPECT_THROW(gae_link_score(z, 0, 3), Error);
}

TEST(Gae, ScoreSymmetricAndInUnitInterval) {
  std::mt19937_64 rng(8);
  const Matrix z = random_matrix(10, 4, rng, -2, 2);
  for (Index u = 0; u < 10; ++u) {
    for (Index v = 0; v < 10; ++v) {
      const float s = gae_link_score(z, u, v);
      EXPECT_EQ(s, gae_link_score(z, v, u));
      EXPECT_GT(s, 0.0f);
      EXPECT_LT(s, 1.0f);
    }
  }
}

TEST(ModelSpec, WidthsFollowDataset) {
  const Dataset ds = tiny_citation(1);
  const ModelSpec spec = ModelSpec::for_dataset(ds);
  EXPECT_EQ(spec.kind, ModelKind::GCN2);
  EXPECT_EQ(spec.in_dim, 60);
  EXPECT_EQ(spec.out_dim, 3);
  auto model = make_model(spec, 1);
  EXPECT_EQ(model->parameter("conv1.weight").var.rows(), 60);
  EXPECT_EQ(model->parameter("conv2.weight").var.cols(), 3);
}

TEST(Training, FixedSeedIsBitReproducible) {
  for (Task task : {Task::NodeClassification, Task::LinkPrediction, Task::GraphClassification}) {
    Dataset ds = task == Task::GraphClassification ? tiny_proteins(2) : tiny_citation(2);
    ds.task = task;
    const Split split = make_splits(ds, {0.6, 0.2, 0.2}, 7);
    TrainOptions options;
    options.optim.max_epochs = 15;
    options.seed = 3;
    ModelState states[2];
    double metrics[2];
    for (int run = 0; run < 2; ++run) {
      auto model = make_model(ModelSpec::for_dataset(ds), 3);
      metrics[run] = train(*model, ds, split, options).test_metric;
      states[run] = model->state();
    }
    EXPECT_TRUE(bitwise_equal(states[0], states[1])) << to_string(task);
    EXPECT_EQ(metrics[0], metrics[1]);
  }
}

TEST(Training, LearnsTinyCitationGraph) {
  const Dataset ds = tiny_citation(3);
  const Split split = make_splits(ds, {0.6, 0.2, 0.2}, 7);
  TrainOptions options;
  options.optim.max_epochs = 100;
  options.seed = 1;
  auto model = make_model(ModelSpec::for_dataset(ds), 1);
  const TrainResult r = train(*model, ds, split, options);
  EXPECT_GT(r.test_metric, 0.6);
  EXPECT_EQ(static_cast<int>(r.history.size()), 100);
  EXPECT_DOUBLE_EQ(evaluate_test(*model, ds, split), r.test_metric);
}

TEST(Training, EpochCallbackSeesEveryEpoch) {
  const Dataset ds = tiny_citation(4);
  const Split split = make_splits(ds, {0.6, 0.2, 0.2}, 7);
  TrainOptions options;
  options.optim.max_epochs = 7;
  int calls = 0;
  options.on_epoch_end = [&](int, GnnModel&) { ++calls; };
  auto model = make_model(ModelSpec::for_dataset(ds), 1);
  train(*model, ds, split, options);
  EXPECT_EQ(calls, 7);
}
