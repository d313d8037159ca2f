#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "gnncomp/graph.hpp"
#include "gnncomp/smiles.hpp"
#include "gnncomp/synthetic.hpp"
#include "test_util.hpp"

using namespace gnncomp;
using gnncomp::testing::TempDir;

namespace {

std::set<std::pair<Index, Index>> edge_set(const Graph& g) {
  std::set<std::pair<Index, Index>> out;
  for (const auto& e : g.edges) out.insert(std::minmax(e.src, e.dst));
  return out;
}

Dataset single_graph(Graph g, Task task) {
  Dataset ds;
  ds.task = task;
  ds.num_classes = 2;
  g.node_labels = std::vector<int>(static_cast<std::size_t>(g.num_nodes), 0);
  for (Index i = 0; i < g.num_nodes; i += 2) (*g.node_labels)[static_cast<std::size_t>(i)] = 1;
  ds.graphs.push_back(std::move(g));
  return ds;
}

}  // namespace

TEST(Cora, ThreeRowFixture) {
  TempDir dir;
  const auto content = dir.write("c.content", "p1 1 0 1 Theory\np2 0 1 0 Neural\np3 1 1 0 Theory\n");
  const auto cites = dir.write("c.cites", "p1 p2\np3 p1\n");
  const Dataset ds = load_cora(content, cites);
  ASSERT_EQ(ds.graphs.size(), 1u);
  const Graph& g = ds.graphs.front();
  EXPECT_EQ(g.num_nodes, 3);
  EXPECT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.feature_dim(), 3);
  EXPECT_EQ(ds.num_classes, 2);
  EXPECT_EQ(edge_set(g), (std::set<std::pair<Index, Index>>{{0, 1}, {0, 2}}));
  // Classes are numbered by first appearance.
  EXPECT_EQ(*g.node_labels, (std::vector<int>{0, 1, 0}));
  EXPECT_FLOAT_EQ(g.node_features(2, 1), 1.0f);
}

TEST(Cora, EmptyCitesGivesNoEdges) {
  TempDir dir;
  const Dataset ds = load_cora(dir.write("c.content", "a 1 0 X\nb 0 1 Y\n"), dir.write("c.cites", ""));
  EXPECT_EQ(ds.graphs.front().num_nodes, 2);
  EXPECT_TRUE(ds.graphs.front().edges.empty());
}

TEST(Cora, UnknownIdsAreSkippedAndDuplicatesMerged) {
  TempDir dir;
  const auto content = dir.write("c.content", "a 1 X\nb 0 Y\nc 1 X\n");
  const Dataset ds = load_cora(content, dir.write("c.cites", "a b\nb a\na zz\nc c\n"));
  EXPECT_EQ(ds.graphs.front().edges.size(), 1u);
  EXPECT_EQ(ds.skipped_records, 1u);
}

TEST(Cora, BadFeatureReportsLine) {
  TempDir dir;
  const auto content = dir.write("c.content", "a 1 0 X\nb 0 q Y\n");
  try {
    load_cora(content, dir.write("c.cites", ""));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), 2u);
  }
}

TEST(Cora, MissingFileThrows) {
  TempDir dir;
  EXPECT_THROW(load_cora(dir / "none.content", dir / "none.cites"), Error);
}

TEST(Cora, SyntheticFilesRoundTripWithCoraCounts) {
  const Dataset synth = make_citation_dataset(CitationConfig{}, 1);
  TempDir dir;
  write_cora_files(synth, dir / "cora.content", dir / "cora.cites");
  const Dataset ds = load_cora(dir / "cora.content", dir / "cora.cites");
  const Graph& g = ds.graphs.front();
  EXPECT_EQ(g.num_nodes, 2708);
  EXPECT_EQ(g.edges.size(), 5278u);
  EXPECT_EQ(g.feature_dim(), 1433);
  EXPECT_EQ(ds.num_classes, 7);
  EXPECT_EQ(edge_set(g), edge_set(synth.graphs.front()));
}

TEST(Cora, RealFilesWhenAvailable) {
  const char* root = std::getenv("GNNCOMP_DATA_DIR");
  if (!root) GTEST_SKIP() << "GNNCOMP_DATA_DIR not set";
  const std::filesystem::path dir = std::filesystem::path(root) / "cora";
  if (!std::filesystem::exists(dir / "cora.content")) GTEST_SKIP() << "no cora files";
  const Dataset ds = load_cora(dir / "cora.content", dir / "cora.cites");
  EXPECT_EQ(ds.graphs.front().num_nodes, 2708);
  EXPECT_EQ(ds.graphs.front().edges.size(), 5278u);
  EXPECT_EQ(ds.graphs.front().feature_dim(), 1433);
  EXPECT_EQ(ds.num_classes, 7);
}

TEST(Tu, SingleGraphTwoNodes) {
  TempDir dir;
  dir.write("T_A.txt", "1, 2\n2, 1\n");
  dir.write("T_graph_indicator.txt", "1\n1\n");
  dir.write("T_graph_labels.txt", "1\n");
  const Dataset ds = load_tu(dir.path());
  ASSERT_EQ(ds.graphs.size(), 1u);
  EXPECT_EQ(ds.graphs.front().num_nodes, 2);
  EXPECT_EQ(ds.graphs.front().edges.size(), 1u);
  EXPECT_EQ(ds.task, Task::GraphClassification);
  // No attributes or node labels: a constant feature column.
  EXPECT_EQ(ds.graphs.front().feature_dim(), 1);
}

TEST(Tu, ThreeGraphsNodeCountsFollowIndicator) {
  TempDir dir;
  const std::vector<int> indicator = {1, 1, 1, 2, 2, 3, 3, 3, 3};
  std::string ind;
  for (int i : indicator) ind += std::to_string(i) + "\n";
  dir.write("X_graph_indicator.txt", ind);
  dir.write("X_A.txt", "1, 2\n2, 3\n4, 5\n6, 7\n7, 8\n8, 9\n9, 6\n");
  dir.write("X_graph_labels.txt", "0\n1\n0\n");
  dir.write("X_node_labels.txt", "0\n1\n2\n0\n0\n1\n1\n2\n2\n");
  dir.write("X_node_attributes.txt", "0.5\n1\n2\n3\n4\n5\n6\n7\n8\n");
  const Dataset ds = load_tu(dir.path());
  ASSERT_EQ(ds.graphs.size(), 3u);
  for (std::size_t g = 0; g < 3; ++g) {
    const auto expected = std::count(indicator.begin(), indicator.end(), static_cast<int>(g + 1));
    EXPECT_EQ(ds.graphs[g].num_nodes, expected);
  }
  EXPECT_EQ(ds.graphs[2].edges.size(), 4u);
  EXPECT_EQ(ds.num_classes, 2);
  EXPECT_EQ(ds.feature_dim(), 1 + 3);
  EXPECT_FLOAT_EQ(ds.graphs[0].node_features(0, 0), 0.5f);
  EXPECT_FLOAT_EQ(ds.graphs[0].node_features(1, 2), 1.0f);
}

TEST(Tu, CrossGraphEdgeIsRejected) {
  TempDir dir;
  dir.write("X_graph_indicator.txt", "1\n2\n");
  dir.write("X_A.txt", "1, 2\n");
  dir.write("X_graph_labels.txt", "0\n1\n");
  EXPECT_THROW(load_tu(dir.path()), ParseError);
}

TEST(Tu, MissingFilesThrow) {
  TempDir dir;
  EXPECT_THROW(load_tu(dir.path()), Error);
  dir.write("X_A.txt", "1, 2\n");
  EXPECT_THROW(load_tu(dir.path()), Error);
}

TEST(Tu, SyntheticProteinsRoundTrip) {
  const Dataset synth = make_protein_dataset(ProteinConfig{}, 3);
  TempDir dir;
  write_tu_files(synth, dir.path(), "PROTEINS", 3);
  const Dataset ds = load_tu(dir.path());
  EXPECT_EQ(ds.graphs.size(), 1113u);
  EXPECT_EQ(ds.num_classes, 2);
  for (std::size_t i = 0; i < ds.graphs.size(); i += 97) {
    EXPECT_EQ(ds.graphs[i].num_nodes, synth.graphs[i].num_nodes);
    EXPECT_EQ(edge_set(ds.graphs[i]), edge_set(synth.graphs[i]));
  }
}

TEST(Tu, RealProteinsWhenAvailable) {
  const char* root = std::getenv("GNNCOMP_DATA_DIR");
  if (!root) GTEST_SKIP() << "GNNCOMP_DATA_DIR not set";
  const std::filesystem::path dir = std::filesystem::path(root) / "PROTEINS";
  if (!std::filesystem::exists(dir)) GTEST_SKIP() << "no PROTEINS directory";
  const Dataset ds = load_tu(dir);
  EXPECT_EQ(ds.graphs.size(), 1113u);
  EXPECT_EQ(ds.num_classes, 2);
}

TEST(Smiles, SingleAtom) {
  const Graph g = parse_smiles("C");
  EXPECT_EQ(g.num_nodes, 1);
  EXPECT_TRUE(g.edges.empty());
  EXPECT_EQ(g.feature_dim(), kSmilesFeatureDim);
}

TEST(Smiles, SingleBond) {
  const Graph g = parse_smiles("CC");
  EXPECT_EQ(g.num_nodes, 2);
  EXPECT_EQ(g.edges.size(), 1u);
}

TEST(Smiles, CyclopropaneIsTriangle) {
  const Graph g = parse_smiles("C1CC1");
  EXPECT_EQ(g.num_nodes, 3);
  EXPECT_EQ(edge_set(g), (std::set<std::pair<Index, Index>>{{0, 1}, {1, 2}, {0, 2}}));
}

TEST(Smiles, BranchesBracketsAndTwoLetterElements) {
  const Graph g = parse_smiles("CC(=O)[NH3+]Cl");
  EXPECT_EQ(g.num_nodes, 5);
  EXPECT_EQ(edge_set(g), (std::set<std::pair<Index, Index>>{{0, 1}, {1, 2}, {1, 3}, {3, 4}}));
  EXPECT_FLOAT_EQ(g.node_features(4, 7), 1.0f);  // Cl
  EXPECT_FLOAT_EQ(g.node_features(1, kSmilesFeatureDim - 1), 3.0f);
}

TEST(Smiles, AromaticAndPercentRings) {
  EXPECT_EQ(parse_smiles("c1ccccc1").edges.size(), 6u);
  EXPECT_EQ(parse_smiles("C%12CCC%12").edges.size(), 4u);
}

TEST(Smiles, ErrorsCarryOffsets) {
  auto offset = [](const char* s) -> std::size_t {
    try {
      parse_smiles(s);
    } catch (const ParseError& e) {
      return e.location();
    }
    return std::string::npos;
  };
  EXPECT_EQ(offset("CC[C@H]C"), 4u);
  EXPECT_EQ(offset("C1CC"), 1u);
  EXPECT_EQ(offset("CC)"), 2u);
  EXPECT_EQ(offset("CXC"), 1u);
  EXPECT_EQ(offset(""), 0u);
  EXPECT_NE(offset("CC="), std::string::npos);
}

namespace {

// Independent tokenizer: every atom after the first bonds to its predecessor
// (explicitly when a bond symbol precedes it, implicitly otherwise); each pair
// of matching ring labels adds one bond.
struct BondTally {
  Index atoms = 0;
  Index symbol_bonds = 0;
  Index implicit_bonds = 0;
  Index ring_pairs = 0;
};

BondTally tally_bonds(const std::string& s) {
  BondTally t;
  std::map<std::string, int> open;
  bool bond_pending = false;
  for (std::size_t i = 0; i < s.size();) {
    const char c = s[i];
    if (c == '-' || c == '=' || c == '#' || c == ':') {
      bond_pending = true;
      ++i;
    } else if (c == '(' || c == ')') {
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
      const std::string label = c == '%' ? s.substr(i, 3) : s.substr(i, 1);
      i += label.size();
      if (open.count(label)) {
        open.erase(label);
        ++t.ring_pairs;
      } else {
        open[label] = 1;
      }
      bond_pending = false;
    } else {
      if (c == '[') {
        i = s.find(']', i) + 1;
      } else if ((c == 'C' && i + 1 < s.size() && s[i + 1] == 'l') || (c == 'B' && i + 1 < s.size() && s[i + 1] == 'r')) {
        i += 2;
      } else {
        ++i;
      }
      if (t.atoms > 0) (bond_pending ? t.symbol_bonds : t.implicit_bonds) += 1;
      ++t.atoms;
      bond_pending = false;
    }
  }
  return t;
}

}  // namespace

TEST(Smiles, BondCountMatchesReferenceTokenizer) {
  MoleculeConfig config;
  config.num_molecules = 42;
  std::vector<std::string> fixture = {"CCO", "c1ccccc1O", "CC(C)(C)Br", "N#CC=O", "C1CC2CCC1C2",
                                      "[NH4+]", "OC(=O)c1ccc(Cl)cc1", "C%10CC%10"};
  for (const auto& row : make_molecule_rows(config, 11)) fixture.push_back(row.smiles);
  ASSERT_EQ(fixture.size(), 50u);
  for (const auto& s : fixture) {
    const BondTally t = tally_bonds(s);
    const Graph g = parse_smiles(s);
    EXPECT_EQ(g.num_nodes, t.atoms) << s;
    EXPECT_EQ(static_cast<Index>(g.edges.size()), t.symbol_bonds + t.ring_pairs + t.implicit_bonds) << s;
  }
}

TEST(Bbbp, SkipsUnsupportedRows) {
  TempDir dir;
  const auto csv = dir.write("b.csv",
                             "name,p_np,smiles\n"
                             "a,1,CCO\n"
                             "b,0,C[C@H](N)O\n"
                             "\"c, quoted\",0,c1ccccc1\n");
  const Dataset ds = load_bbbp(csv);
  EXPECT_EQ(ds.graphs.size(), 2u);
  EXPECT_EQ(ds.skipped_records, 1u);
  EXPECT_EQ(ds.graphs[0].graph_label, 1);
  EXPECT_EQ(ds.graphs[1].graph_label, 0);
  EXPECT_EQ(ds.num_classes, 2);
}

TEST(Bbbp, SyntheticCsvRoundTrip) {
  MoleculeConfig config;
  config.num_molecules = 200;
  const auto rows = make_molecule_rows(config, 5);
  TempDir dir;
  write_bbbp_csv(rows, dir / "BBBP.csv");
  const Dataset ds = load_bbbp(dir / "BBBP.csv");
  EXPECT_EQ(ds.graphs.size() + ds.skipped_records, rows.size());
  const Dataset direct = make_molecule_dataset(config, 5);
  EXPECT_EQ(direct.graphs.size(), ds.graphs.size());
}

TEST(Splits, ExactFractions) {
  std::mt19937_64 rng(1);
  const Dataset ds = single_graph(gnncomp::testing::random_graph(100, 0.05, 3, rng), Task::NodeClassification);
  const Split s = make_splits(ds, {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.val.size(), 10u);
  EXPECT_EQ(s.test.size(), 10u);
}

TEST(Splits, DeterministicDisjointAndCovering) {
  std::mt19937_64 rng(2);
  const Dataset ds = single_graph(gnncomp::testing::random_graph(137, 0.05, 3, rng), Task::NodeClassification);
  const Split a = make_splits(ds, {0.6, 0.2, 0.2}, 7);
  const Split b = make_splits(ds, {0.6, 0.2, 0.2}, 7);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.test, b.test);
  std::vector<Index> all;
  for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(all.end(), part->begin(), part->end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
  ASSERT_EQ(all.size(), 137u);
  EXPECT_EQ(all.front(), 0);
  EXPECT_EQ(all.back(), 136);
  EXPECT_NE(make_splits(ds, {0.6, 0.2, 0.2}, 8).test, a.test);
}

TEST(Splits, LinkSplitHoldsOutBalancedNegatives) {
  Dataset ds = make_citation_dataset(CitationConfig{}, 1);
  ds.task = Task::LinkPrediction;
  const Graph& g = ds.graphs.front();
  ASSERT_EQ(g.edges.size(), 5278u);
  const Split s = make_splits(ds, {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(s.test.size(), 527u);
  EXPECT_EQ(s.test_negatives.size(), 527u);
  EXPECT_EQ(s.val_negatives.size(), s.val.size());

  std::set<std::pair<Index, Index>> train_adj;
  for (Index e : s.train) train_adj.insert(std::minmax(g.edges[e].src, g.edges[e].dst));
  const auto all_edges = edge_set(g);
  for (Index e : s.test) EXPECT_FALSE(train_adj.count(std::minmax(g.edges[e].src, g.edges[e].dst)));
  std::set<std::pair<Index, Index>> negatives;
  for (const auto* list : {&s.val_negatives, &s.test_negatives}) {
    for (const auto& n : *list) {
      const auto key = std::minmax(n.src, n.dst);
      EXPECT_NE(n.src, n.dst);
      EXPECT_FALSE(all_edges.count(key));
      EXPECT_TRUE(negatives.insert(key).second);
    }
  }
}

TEST(Splits, GraphSplitCountsGraphs) {
  const Dataset ds = make_protein_dataset(ProteinConfig{}, 1);
  const Split s = make_splits(ds, {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 1113u);
  EXPECT_EQ(s.test.size(), 111u);
}

TEST(GraphText, RoundTripRandomGraphs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g = gnncomp::testing::random_graph(1 + trial % 17, 0.3, trial % 4, rng);
    if (trial % 3 == 0) g.node_labels = std::vector<int>(static_cast<std::size_t>(g.num_nodes), trial % 5);
    if (trial % 2 == 0) g.graph_label = trial % 3;
    std::stringstream ss;
    write_graph_text(ss, g);
    const Graph back = read_graph_text(ss);
    EXPECT_TRUE(back == g) << "trial " << trial;
  }
}

TEST(GraphInvariants, ValidateRejectsBadGraphs) {
  Graph g;
  g.num_nodes = 2;
  g.node_features = Matrix::Zero(2, 1);
  g.edges = {{0, 2}};
  EXPECT_THROW(g.validate(), Error);
  g.edges = {{1, 1}};
  EXPECT_THROW(g.validate(), Error);
  g.edges = {{0, 1}};
  g.node_features = Matrix::Zero(3, 1);
  EXPECT_THROW(g.validate(), Error);
}

namespace {

std::string mutate(std::string s, std::mt19937_64& rng) {
  static const std::string alphabet = "0123456789 ,\n-.abcCN()[]=#%1eX";
  std::uniform_int_distribution<int> op(0, 2);
  const int edits = 1 + static_cast<int>(rng() % 3);
  for (int k = 0; k < edits; ++k) {
    const std::size_t at = s.empty() ? 0 : rng() % s.size();
    const char c = alphabet[rng() % alphabet.size()];
    switch (op(rng)) {
      case 0: s.insert(s.begin() + static_cast<std::ptrdiff_t>(at), c); break;
      case 1:
        if (!s.empty()) s.erase(at, 1);
        break;
      default:
        if (!s.empty()) s[at] = c;
        break;
    }
  }
  return s;
}

void expect_valid_or_rejected(const std::function<Dataset()>& load) {
  try {
    const Dataset ds = load();
    for (const auto& g : ds.graphs) {
      for (const auto& e : g.edges) {
        EXPECT_GE(e.src, 0);
        EXPECT_LT(e.src, g.num_nodes);
        EXPECT_GE(e.dst, 0);
        EXPECT_LT(e.dst, g.num_nodes);
      }
    }
  } catch (const Error&) {
  }
}

}  // namespace

TEST(ParserFuzz, EndpointsAlwaysValid) {
  std::mt19937_64 rng(4);
  TempDir dir;
  const std::string content = "p1 1 0 A\np2 0 1 B\np3 1 1 A\np4 0 0 C\n";
  const std::string cites = "p1 p2\np2 p3\np4 p1\n";
  const std::string tu_a = "1, 2\n2, 3\n4, 5\n";
  const std::string tu_ind = "1\n1\n1\n2\n2\n";
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = dir.write("f.content", mutate(content, rng));
    const auto e = dir.write("f.cites", mutate(cites, rng));
    expect_valid_or_rejected([&] { return load_cora(c, e); });

    dir.write("F_A.txt", mutate(tu_a, rng));
    dir.write("F_graph_indicator.txt", trial % 2 ? mutate(tu_ind, rng) : tu_ind);
    dir.write("F_graph_labels.txt", "0\n1\n");
    expect_valid_or_rejected([&] { return load_tu(dir.path()); });

    const std::string smiles = mutate("CC(=O)Nc1ccc(O)cc1", rng);
    try {
      const Graph g = parse_smiles(smiles);
      EXPECT_NO_THROW(g.validate()) << smiles;
    } catch (const ParseError& err) {
      EXPECT_LE(err.location(), smiles.size()) << smiles;
    }
  }
}
