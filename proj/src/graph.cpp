#include "gnncomp/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gnncomp/smiles.hpp"

namespace gnncomp {

namespace {

std::uint64_t edge_key(Index a, Index b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

/// Collects undirected edges, dropping self-loops and duplicates in either direction.
class EdgeAccumulator {
 public:
  bool add(Index a, Index b) {
    if (a == b) return false;
    if (!seen_.insert(edge_key(a, b)).second) return false;
    edges_.push_back({std::min(a, b), std::max(a, b)});
    return true;
  }
  std::vector<Edge> take() { return std::move(edges_); }

 private:
  std::unordered_set<std::uint64_t> seen_;
  std::vector<Edge> edges_;
};

}  // namespace

std::vector<Index> Graph::degrees() const {
  std::vector<Index> deg(static_cast<std::size_t>(num_nodes), 0);
  for (const auto& e : edges) {
    ++deg[static_cast<std::size_t>(e.src)];
    ++deg[static_cast<std::size_t>(e.dst)];
  }
  return deg;
}

std::vector<Edge> Graph::symmetric_edges() const {
  std::vector<Edge> out;
  out.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    out.push_back(e);
    out.push_back({e.dst, e.src});
  }
  return out;
}

void Graph::validate() const {
  if (node_features.rows() != num_nodes) {
    throw Error("graph: feature rows " + std::to_string(node_features.rows()) +
                " != num_nodes " + std::to_string(num_nodes));
  }
  for (const auto& e : edges) {
    if (e.src < 0 || e.dst < 0 || e.src >= num_nodes || e.dst >= num_nodes) {
      throw Error("graph: edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                  ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
    if (e.src == e.dst) throw Error("graph: self-loop at node " + std::to_string(e.src));
  }
  if (node_labels && static_cast<Index>(node_labels->size()) != num_nodes) {
    throw Error("graph: node label count mismatch");
  }
}

bool operator==(const Graph& a, const Graph& b) {
  return a.num_nodes == b.num_nodes && a.edges == b.edges &&
         a.node_features.rows() == b.node_features.rows() &&
         a.node_features.cols() == b.node_features.cols() &&
         a.node_features == b.node_features && a.node_labels == b.node_labels &&
         a.graph_label == b.graph_label;
}

std::string to_string(Task task) {
  switch (task) {
    case Task::NodeClassification: return "node";
    case Task::GraphClassification: return "graph";
    case Task::LinkPrediction: return "link";
  }
  return "unknown";
}

void Dataset::validate() const {
  if (task != Task::GraphClassification && graphs.size() != 1) {
    throw Error("dataset " + name + ": single-graph task holds " +
                std::to_string(graphs.size()) + " graphs");
  }
  for (const auto& g : graphs) {
    g.validate();
    if (g.graph_label && (*g.graph_label < 0 || *g.graph_label >= num_classes)) {
      throw Error("dataset " + name + ": graph label out of range");
    }
    if (g.node_labels) {
      for (int l : *g.node_labels) {
        if (l < 0 || l >= num_classes) throw Error("dataset " + name + ": node label out of range");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Cora

Dataset load_cora(const std::filesystem::path& content_path,
                  const std::filesystem::path& cites_path) {
  auto content = open_or_throw(content_path);
  std::unordered_map<std::string, Index> id_to_node;
  std::map<std::string, int> class_ids;
  std::vector<std::string> class_order;
  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  Index feature_dim = -1;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(content, line)) {
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 3) throw ParseError("cora content: too few columns", line_no);
    const Index dim = static_cast<Index>(tok.size()) - 2;
    if (feature_dim < 0) feature_dim = dim;
    if (dim != feature_dim) {
      throw ParseError("cora content: expected " + std::to_string(feature_dim) +
                           " features, got " + std::to_string(dim),
                       line_no);
    }
    std::vector<float> feats(static_cast<std::size_t>(dim));
    for (Index j = 0; j < dim; ++j) {
      if (!parse_number(tok[static_cast<std::size_t>(j + 1)], feats[static_cast<std::size_t>(j)])) {
        throw ParseError("cora content: bad feature value '" + tok[static_cast<std::size_t>(j + 1)] + "'",
                         line_no);
      }
    }
    if (!id_to_node.emplace(tok.front(), static_cast<Index>(rows.size())).second) {
      throw ParseError("cora content: duplicate id " + tok.front(), line_no);
    }
    const std::string& cls = tok.back();
    auto [it, inserted] = class_ids.emplace(cls, static_cast<int>(class_order.size()));
    if (inserted) class_order.push_back(cls);
    labels.push_back(it->second);
    rows.push_back(std::move(feats));
  }

  Graph g;
  g.num_nodes = static_cast<Index>(rows.size());
  g.node_features = Matrix::Zero(g.num_nodes, std::max<Index>(feature_dim, 0));
  for (Index i = 0; i < g.num_nodes; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < r.size(); ++j) g.node_features(i, static_cast<Index>(j)) = r[j];
  }
  g.node_labels = std::move(labels);

  Dataset ds;
  auto cites = open_or_throw(cites_path);
  EdgeAccumulator acc;
  line_no = 0;
  while (std::getline(cites, line)) {
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 2) throw ParseError("cora cites: expected 2 columns", line_no);
    auto a = id_to_node.find(tok[0]);
    auto b = id_to_node.find(tok[1]);
    if (a == id_to_node.end() || b == id_to_node.end()) {
      ++ds.skipped_records;
      continue;
    }
    acc.add(a->second, b->second);
  }
  g.edges = acc.take();

  ds.graphs.push_back(std::move(g));
  ds.task = Task::NodeClassification;
  ds.num_classes = static_cast<int>(class_order.size());
  ds.name = "cora";
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// TU

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    out.push_back(line);
  }
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

std::vector<long> read_int_column(const std::filesystem::path& path) {
  std::vector<long> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    long v = 0;
    if (!parse_number(trim(line), v)) {
      throw ParseError(path.filename().string() + ": expected integer", line_no);
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

Dataset load_tu(const std::filesystem::path& dir) {
  std::string prefix;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const auto fname = entry.path().filename().string();
      if (fname.size() > 6 && fname.ends_with("_A.txt")) {
        prefix = fname.substr(0, fname.size() - 6);
        break;
      }
    }
  }
  if (prefix.empty()) throw Error("missing TU file <DS>_A.txt in " + dir.string());
  auto file = [&](const char* suffix) { return dir / (prefix + suffix); };
  for (const char* mandatory : {"_graph_indicator.txt", "_graph_labels.txt"}) {
    if (!std::filesystem::exists(file(mandatory))) {
      throw Error("missing TU file " + file(mandatory).filename().string());
    }
  }

  const auto indicator = read_int_column(file("_graph_indicator.txt"));
  const auto graph_label_raw = read_int_column(file("_graph_labels.txt"));
  const Index total_nodes = static_cast<Index>(indicator.size());

  std::vector<long> node_label_raw;
  if (std::filesystem::exists(file("_node_labels.txt"))) {
    node_label_raw = read_int_column(file("_node_labels.txt"));
    if (static_cast<Index>(node_label_raw.size()) != total_nodes) {
      throw Error(prefix + "_node_labels.txt: row count differs from graph indicator");
    }
  }
  std::vector<std::vector<float>> attrs;
  if (std::filesystem::exists(file("_node_attributes.txt"))) {
    std::size_t line_no = 0;
    for (const auto& line : read_lines(file("_node_attributes.txt"))) {
      ++line_no;
      std::vector<float> row;
      for (const auto& cell : split_on(line, ',')) {
        float v = 0;
        if (!parse_number(trim(cell), v)) {
          throw ParseError(prefix + "_node_attributes.txt: bad value", line_no);
        }
        row.push_back(v);
      }
      if (!attrs.empty() && row.size() != attrs.front().size()) {
        throw ParseError(prefix + "_node_attributes.txt: ragged row", line_no);
      }
      attrs.push_back(std::move(row));
    }
    if (static_cast<Index>(attrs.size()) != total_nodes) {
      throw Error(prefix + "_node_attributes.txt: row count differs from graph indicator");
    }
  }

  // Graph ids in ascending order; local node index follows global order.
  std::map<long, std::size_t> graph_slot;
  for (long gid : indicator) graph_slot.emplace(gid, 0);
  {
    std::size_t k = 0;
    for (auto& [gid, slot] : graph_slot) slot = k++;
  }
  if (graph_label_raw.size() != graph_slot.size()) {
    throw Error(prefix + "_graph_labels.txt: expected " + std::to_string(graph_slot.size()) +
                " labels, found " + std::to_string(graph_label_raw.size()));
  }
  std::vector<Index> local_index(static_cast<std::size_t>(total_nodes));
  std::vector<Index> graph_sizes(graph_slot.size(), 0);
  std::vector<std::size_t> node_graph(static_cast<std::size_t>(total_nodes));
  for (Index i = 0; i < total_nodes; ++i) {
    const std::size_t slot = graph_slot.at(indicator[static_cast<std::size_t>(i)]);
    node_graph[static_cast<std::size_t>(i)] = slot;
    local_index[static_cast<std::size_t>(i)] = graph_sizes[slot]++;
  }

  std::map<long, int> node_label_ids;
  for (long l : node_label_raw) node_label_ids.emplace(l, 0);
  {
    int k = 0;
    for (auto& [l, id] : node_label_ids) id = k++;
  }
  std::map<long, int> graph_label_ids;
  for (long l : graph_label_raw) graph_label_ids.emplace(l, 0);
  {
    int k = 0;
    for (auto& [l, id] : graph_label_ids) id = k++;
  }

  const Index attr_dim = attrs.empty() ? 0 : static_cast<Index>(attrs.front().size());
  const Index onehot_dim = static_cast<Index>(node_label_ids.size());
  const bool constant_feature = attr_dim + onehot_dim == 0;
  const Index feat_dim = constant_feature ? 1 : attr_dim + onehot_dim;

  Dataset ds;
  ds.task = Task::GraphClassification;
  ds.name = prefix;
  ds.num_classes = static_cast<int>(graph_label_ids.size());
  ds.graphs.resize(graph_slot.size());
  for (std::size_t s = 0; s < ds.graphs.size(); ++s) {
    auto& g = ds.graphs[s];
    g.num_nodes = graph_sizes[s];
    g.node_features = Matrix::Zero(g.num_nodes, feat_dim);
    g.graph_label = graph_label_ids.at(graph_label_raw[s]);
  }
  for (Index i = 0; i < total_nodes; ++i) {
    auto& g = ds.graphs[node_graph[static_cast<std::size_t>(i)]];
    const Index r = local_index[static_cast<std::size_t>(i)];
    if (constant_feature) {
      g.node_features(r, 0) = 1.0f;
      continue;
    }
    for (Index j = 0; j < attr_dim; ++j) {
      g.node_features(r, j) = attrs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    if (onehot_dim > 0) {
      g.node_features(r, attr_dim + node_label_ids.at(node_label_raw[static_cast<std::size_t>(i)])) = 1.0f;
    }
  }

  std::vector<EdgeAccumulator> acc(ds.graphs.size());
  std::size_t line_no = 0;
  for (const auto& line : read_lines(file("_A.txt"))) {
    ++line_no;
    auto cells = split_on(line, ',');
    long a = 0, b = 0;
    if (cells.size() != 2 || !parse_number(trim(cells[0]), a) || !parse_number(trim(cells[1]), b)) {
      throw ParseError(prefix + "_A.txt: expected 'i, j'", line_no);
    }
    if (a < 1 || b < 1 || a > total_nodes || b > total_nodes) {
      throw ParseError(prefix + "_A.txt: node id out of range", line_no);
    }
    const auto ga = node_graph[static_cast<std::size_t>(a - 1)];
    const auto gb = node_graph[static_cast<std::size_t>(b - 1)];
    if (ga != gb) throw ParseError(prefix + "_A.txt: edge crosses graph boundary", line_no);
    acc[ga].add(local_index[static_cast<std::size_t>(a - 1)], local_index[static_cast<std::size_t>(b - 1)]);
  }
  for (std::size_t s = 0; s < ds.graphs.size(); ++s) ds.graphs[s].edges = acc[s].take();
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// BBBP

namespace {

std::vector<std::string> parse_csv_row(const std::string& line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError("csv: unterminated quote", line_no);
  cells.push_back(cur);
  return cells;
}

}  // namespace

Dataset load_bbbp(const std::filesystem::path& csv_path) {
  auto in = open_or_throw(csv_path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("bbbp: empty file", 1);
  const auto header = parse_csv_row(line, 1);
  auto column = [&](const std::string& name) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return trim(h) == name; });
    if (it == header.end()) throw ParseError("bbbp: header lacks column '" + name + "'", 1);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto label_col = column("p_np");
  const auto smiles_col = column("smiles");

  Dataset ds;
  ds.task = Task::GraphClassification;
  ds.name = "bbbp";
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = parse_csv_row(line, line_no);
    if (cells.size() != header.size()) throw ParseError("bbbp: column count mismatch", line_no);
    int label = 0;
    if (!parse_number(trim(cells[label_col]), label) || label < 0) {
      throw ParseError("bbbp: bad label '" + cells[label_col] + "'", line_no);
    }
    try {
      Graph g = parse_smiles(trim(cells[smiles_col]));
      g.graph_label = label;
      max_label = std::max(max_label, label);
      ds.graphs.push_back(std::move(g));
    } catch (const ParseError&) {
      ++ds.skipped_records;
    }
  }
  ds.num_classes = std::max(2, max_label + 1);
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Splits

Split make_splits(const Dataset& dataset, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw Error("make_splits: ratios must be positive and sum to 1");
  }
  if (dataset.graphs.empty()) throw Error("make_splits: empty dataset");
  Index population = 0;
  switch (dataset.task) {
    case Task::NodeClassification: population = dataset.graphs.front().num_nodes; break;
    case Task::GraphClassification: population = static_cast<Index>(dataset.graphs.size()); break;
    case Task::LinkPrediction: population = static_cast<Index>(dataset.graphs.front().edges.size()); break;
  }
  if (population < 3) throw Error("make_splits: population smaller than 3");

  std::vector<Index> order(static_cast<std::size_t>(population));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto count = [&](double r) { return static_cast<Index>(std::floor(r * static_cast<double>(population) + 1e-9)); };
  const Index n_val = std::max<Index>(1, count(ratios.val));
  const Index n_test = std::max<Index>(1, count(ratios.test));
  const Index n_train = population - n_val - n_test;
  if (n_train < 1) throw Error("make_splits: no training items left");

  Split split;
  split.seed = seed;
  auto first = order.begin();
  split.test.assign(first, first + n_test);
  split.val.assign(first + n_test, first + n_test + n_val);
  split.train.assign(first + n_test + n_val, order.end());
  for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());

  if (dataset.task == Task::LinkPrediction) {
    const Graph& g = dataset.graphs.front();
    const double n = static_cast<double>(g.num_nodes);
    const double non_edges = n * (n - 1) / 2 - static_cast<double>(g.edges.size());
    if (non_edges < static_cast<double>(n_val + n_test)) {
      throw Error("make_splits: not enough non-edges for negative sampling");
    }
    std::unordered_set<std::uint64_t> taken;
    for (const auto& e : g.edges) taken.insert(edge_key(e.src, e.dst));
    std::uniform_int_distribution<Index> pick(0, g.num_nodes - 1);
    auto sample = [&](std::size_t k, std::vector<Edge>& out) {
      while (out.size() < k) {
        Index a = pick(rng), b = pick(rng);
        if (a == b) continue;
        if (!taken.insert(edge_key(a, b)).second) continue;
        out.push_back({std::min(a, b), std::max(a, b)});
      }
    };
    sample(split.val.size(), split.val_negatives);
    sample(split.test.size(), split.test_negatives);
  }
  return split;
}

// ---------------------------------------------------------------------------
// Text dump

namespace {

std::string format_float(float v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void write_graph_text(std::ostream& out, const Graph& graph) {
  out << "N " << graph.num_nodes << '\n' << "D " << graph.feature_dim() << '\n';
  for (Index i = 0; i < graph.num_nodes; ++i) {
    out << 'F';
    for (Index j = 0; j < graph.feature_dim(); ++j) out << ' ' << format_float(graph.node_features(i, j));
    out << '\n';
  }
  if (graph.node_labels) {
    for (int l : *graph.node_labels) out << "L " << l << '\n';
  }
  if (graph.graph_label) out << "G " << *graph.graph_label << '\n';
  for (const auto& e : graph.edges) out << "E " << e.src << ' ' << e.dst << '\n';
}

Graph read_graph_text(std::istream& in) {
  Graph g;
  Index dim = -1;
  Index feature_row = 0;
  std::vector<int> labels;
  bool saw_n = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string& tag = tok.front();
    auto need = [&](std::size_t n) {
      if (tok.size() != n) throw ParseError("graph text: wrong field count for '" + tag + "'", line_no);
    };
    auto integer = [&](const std::string& s) {
      Index v = 0;
      if (!parse_number(s, v)) throw ParseError("graph text: bad integer '" + s + "'", line_no);
      return v;
    };
    if (tag == "N") {
      need(2);
      g.num_nodes = integer(tok[1]);
      saw_n = true;
    } else if (tag == "D") {
      need(2);
      if (!saw_n) throw ParseError("graph text: D before N", line_no);
      dim = integer(tok[1]);
      g.node_features = Matrix::Zero(g.num_nodes, dim);
    } else if (tag == "F") {
      if (dim < 0) throw ParseError("graph text: F before D", line_no);
      need(static_cast<std::size_t>(dim) + 1);
      if (feature_row >= g.num_nodes) throw ParseError("graph text: too many F rows", line_no);
      for (Index j = 0; j < dim; ++j) {
        float v = 0;
        if (!parse_number(tok[static_cast<std::size_t>(j + 1)], v)) {
          throw ParseError("graph text: bad float", line_no);
        }
        g.node_features(feature_row, j) = v;
      }
      ++feature_row;
    } else if (tag == "L") {
      need(2);
      labels.push_back(static_cast<int>(integer(tok[1])));
    } else if (tag == "G") {
      need(2);
      g.graph_label = static_cast<int>(integer(tok[1]));
    } else if (tag == "E") {
      need(3);
      g.edges.push_back({integer(tok[1]), integer(tok[2])});
    } else {
      throw ParseError("graph text: unknown record '" + tag + "'", line_no);
    }
  }
  if (!saw_n) throw ParseError("graph text: missing N record", line_no);
  if (dim < 0) g.node_features = Matrix::Zero(g.num_nodes, 0);
  if (feature_row != g.num_nodes && dim > 0) throw ParseError("graph text: missing F rows", line_no);
  if (!labels.empty()) g.node_labels = std::move(labels);
  g.validate();
  return g;
}

CsrMatrix adjacency_matrix(const Graph& graph) {
  std::vector<Eigen::Triplet<float>> trip;
  trip.reserve(graph.edges.size() * 2);
  for (const auto& e : graph.edges) {
    trip.emplace_back(static_cast<int>(e.src), static_cast<int>(e.dst), 1.0f);
    trip.emplace_back(static_cast<int>(e.dst), static_cast<int>(e.src), 1.0f);
  }
  CsrMatrix a(graph.num_nodes, graph.num_nodes);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

}  // namespace gnncomp
