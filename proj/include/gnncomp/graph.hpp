#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gnncomp/core.hpp"

namespace gnncomp {

struct Edge {
  Index src = 0;
  Index dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected graph. Each edge is stored once; `symmetric_edges()` expands it.
struct Graph {
  Index num_nodes = 0;
  std::vector<Edge> edges;
  Matrix node_features;
  std::optional<std::vector<int>> node_labels;
  std::optional<int> graph_label;

  Index feature_dim() const { return node_features.cols(); }
  std::vector<Index> degrees() const;
  std::vector<Edge> symmetric_edges() const;

  /// Throws Error when an invariant is violated (endpoint range, self-loop,
  /// feature row count, label vector length).
  void validate() const;

  friend bool operator==(const Graph& a, const Graph& b);
};

enum class Task { NodeClassification, GraphClassification, LinkPrediction };

std::string to_string(Task task);

struct Dataset {
  std::vector<Graph> graphs;
  Task task = Task::NodeClassification;
  int num_classes = 0;
  std::string name;
  /// Rows/records dropped during loading (unknown ids, unsupported SMILES).
  std::size_t skipped_records = 0;

  Index feature_dim() const { return graphs.empty() ? 0 : graphs.front().feature_dim(); }
  void validate() const;
};

struct Split {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
  /// Link prediction only: sampled non-edges paired with val/test positives.
  std::vector<Edge> val_negatives;
  std::vector<Edge> test_negatives;
  std::uint64_t seed = 0;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

Dataset load_cora(const std::filesystem::path& content_path,
                  const std::filesystem::path& cites_path);

/// Reads a TU-format directory. The dataset prefix is taken from the
/// `<DS>_A.txt` file found there.
Dataset load_tu(const std::filesystem::path& dir);

/// BBBP-style CSV with a `name,p_np,smiles` header. Rows whose SMILES falls
/// outside the supported subset are skipped and counted.
Dataset load_bbbp(const std::filesystem::path& csv_path);

Split make_splits(const Dataset& dataset, SplitRatios ratios, std::uint64_t seed);

/// Line-oriented text dump: `N`, `D`, `F` rows, optional `L`/`G` labels, `E` edges.
void write_graph_text(std::ostream& out, const Graph& graph);
Graph read_graph_text(std::istream& in);

/// Edge list with both directions, as a CSR adjacency of ones (no self-loops).
CsrMatrix adjacency_matrix(const Graph& graph);

}  // namespace gnncomp
