#include "gnncomp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include "gnncomp/smiles.hpp"

namespace gnncomp {

namespace {

using Rng = std::mt19937_64;

double squared_distance(const Matrix& a, Index i, const Matrix& b, Index j) {
  return static_cast<double>((a.row(i) - b.row(j)).squaredNorm());
}

Index sample_weighted(const std::vector<double>& cumulative, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, cumulative.back());
  const double r = u(rng);
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
  return std::min<Index>(static_cast<Index>(it - cumulative.begin()),
                         static_cast<Index>(cumulative.size()) - 1);
}

}  // namespace

Dataset make_citation_dataset(const CitationConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  const int num_classes = static_cast<int>(cfg.class_sizes.size());
  const Index n = std::accumulate(cfg.class_sizes.begin(), cfg.class_sizes.end(), Index{0});
  const int d = cfg.latent_dim;

  std::vector<int> labels;
  for (int c = 0; c < num_classes; ++c) labels.insert(labels.end(), static_cast<std::size_t>(cfg.class_sizes[static_cast<std::size_t>(c)]), c);
  std::shuffle(labels.begin(), labels.end(), rng);

  Matrix centres(num_classes, d);
  for (Index i = 0; i < centres.size(); ++i) centres.data()[i] = gauss(rng) * static_cast<float>(cfg.class_spread);
  Matrix latent(n, d);
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      latent(i, k) = centres(labels[static_cast<std::size_t>(i)], k) + gauss(rng) * static_cast<float>(cfg.node_spread);
    }
  }

  // Each word lives near one class centre.
  Matrix word_loc(cfg.num_features, d);
  for (Index w = 0; w < cfg.num_features; ++w) {
    const Index c = w % num_classes;
    for (int k = 0; k < d; ++k) word_loc(w, k) = centres(c, k) + gauss(rng) * static_cast<float>(cfg.node_spread);
  }

  const double scale2 = 2.0 * d * cfg.node_spread * cfg.node_spread;
  Graph g;
  g.num_nodes = n;
  g.node_features = Matrix::Zero(n, cfg.num_features);
  std::poisson_distribution<int> word_count(cfg.words_per_node);
  std::bernoulli_distribution topical(cfg.topical_word_fraction);
  std::uniform_int_distribution<Index> any_word(0, cfg.num_features - 1);
  std::vector<double> cum(static_cast<std::size_t>(cfg.num_features));
  for (Index i = 0; i < n; ++i) {
    double acc = 0;
    for (Index w = 0; w < cfg.num_features; ++w) {
      acc += std::exp(-squared_distance(latent, i, word_loc, w) / (cfg.word_temperature * scale2));
      cum[static_cast<std::size_t>(w)] = acc;
    }
    const int k = std::max(1, word_count(rng));
    for (int j = 0; j < k; ++j) {
      const Index w = topical(rng) ? sample_weighted(cum, rng) : any_word(rng);
      g.node_features(i, w) = 1.0f;
    }
  }

  // Heavy-tailed activity, proximity-biased partner choice.
  std::lognormal_distribution<double> activity(0.0, 0.9);
  std::vector<double> act_cum(static_cast<std::size_t>(n));
  {
    double acc = 0;
    for (Index i = 0; i < n; ++i) {
      acc += activity(rng);
      act_cum[static_cast<std::size_t>(i)] = acc;
    }
  }
  std::unordered_set<std::uint64_t> seen;
  std::vector<double> cand_w(static_cast<std::size_t>(cfg.edge_candidates));
  std::vector<Index> cand(static_cast<std::size_t>(cfg.edge_candidates));
  while (static_cast<Index>(g.edges.size()) < cfg.num_edges) {
    const Index u = sample_weighted(act_cum, rng);
    double acc = 0;
    for (int c = 0; c < cfg.edge_candidates; ++c) {
      cand[static_cast<std::size_t>(c)] = sample_weighted(act_cum, rng);
      acc += std::exp(-squared_distance(latent, u, latent, cand[static_cast<std::size_t>(c)]) / (cfg.edge_temperature * scale2));
      cand_w[static_cast<std::size_t>(c)] = acc;
    }
    const Index v = cand[static_cast<std::size_t>(sample_weighted(cand_w, rng))];
    if (u == v) continue;
    const auto key = (static_cast<std::uint64_t>(std::min(u, v)) << 32) | static_cast<std::uint64_t>(std::max(u, v));
    if (!seen.insert(key).second) continue;
    g.edges.push_back({std::min(u, v), std::max(u, v)});
  }
  g.node_labels = std::move(labels);

  Dataset ds;
  ds.graphs.push_back(std::move(g));
  ds.task = Task::NodeClassification;
  ds.num_classes = num_classes;
  ds.name = "synth-cora";
  ds.validate();
  return ds;
}

Dataset make_protein_dataset(const ProteinConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution is_class1(cfg.class1_fraction);
  const double sep = cfg.class_separation;

  Dataset ds;
  ds.task = Task::GraphClassification;
  ds.num_classes = 2;
  ds.name = "synth-proteins";
  for (Index gi = 0; gi < cfg.num_graphs; ++gi) {
    const int label = is_class1(rng) ? 1 : 0;
    const double sign = label == 1 ? 1.0 : -1.0;
    // Class shifts size, secondary-structure mix and compactness; per-graph
    // jitter keeps the classes overlapping.
    const double log_size = std::log(cfg.mean_nodes) + 0.25 * sep * sign + 0.45 * gauss(rng);
    const Index n = std::clamp<Index>(static_cast<Index>(std::lround(std::exp(log_size))), 4, 200);
    double mix[3] = {std::exp(0.6 * sep * sign + 0.5 * gauss(rng)), std::exp(0.5 * gauss(rng)),
                     std::exp(-0.6 * sep * sign + 0.5 * gauss(rng))};
    const double mix_sum = mix[0] + mix[1] + mix[2];
    const double persistence = std::clamp(0.55 - 0.25 * sep * sign + 0.15 * gauss(rng), 0.05, 0.95);

    Graph g;
    g.num_nodes = n;
    g.node_features = Matrix::Zero(n, 4);
    Eigen::MatrixXd pos(n, 3);
    Eigen::Vector3d dir(1, 0, 0);
    pos.row(0).setZero();
    std::vector<int> types(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      double r = unit(rng) * mix_sum;
      int t = r < mix[0] ? 0 : (r < mix[0] + mix[1] ? 1 : 2);
      types[static_cast<std::size_t>(i)] = t;
      if (i > 0) {
        Eigen::Vector3d jitter(gauss(rng), gauss(rng), gauss(rng));
        dir = (persistence * dir + (1 - persistence) * jitter).normalized();
        pos.row(i) = pos.row(i - 1) + dir.transpose();
      }
    }
    for (Index i = 0; i < n; ++i) {
      if (i + 1 < n) g.edges.push_back({i, i + 1});
      for (Index j = i + 3; j < n; ++j) {
        if ((pos.row(i) - pos.row(j)).norm() < cfg.contact_radius) g.edges.push_back({i, j});
      }
    }
    const auto deg = g.degrees();
    for (Index i = 0; i < n; ++i) {
      const int t = types[static_cast<std::size_t>(i)];
      const double attr = 0.4 * (t + 1) + 0.1 * static_cast<double>(deg[static_cast<std::size_t>(i)]) + 0.3 * gauss(rng);
      g.node_features(i, 0) = static_cast<float>(std::max(0.0, attr));
      g.node_features(i, 1 + t) = 1.0f;
    }
    g.graph_label = label;
    ds.graphs.push_back(std::move(g));
  }
  ds.validate();
  return ds;
}

namespace {

struct MoleculeBuilder {
  Rng& rng;
  std::string out;
  int atoms = 0;
  int polar = 0;
  int next_ring = 1;

  void atom(double polar_bias) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(rng);
    const char* sym = "C";
    if (r < polar_bias * 0.55) {
      sym = "N";
      ++polar;
    } else if (r < polar_bias) {
      sym = "O";
      ++polar;
    } else if (r < polar_bias + 0.04) {
      sym = "Cl";
    } else if (r < polar_bias + 0.07) {
      sym = "F";
    } else if (r < polar_bias + 0.09) {
      sym = "S";
    } else if (r < polar_bias + 0.18) {
      sym = "c";
    }
    out += sym;
    ++atoms;
  }

  void chain(int length, double polar_bias, int depth) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int open_ring = -1;
    int ring_age = 0;
    for (int i = 0; i < length; ++i) {
      if (i > 0 && u(rng) < 0.12) out += "=";
      atom(polar_bias);
      if (open_ring < 0 && i + 3 < length && next_ring <= 9 && u(rng) < 0.15) {
        open_ring = next_ring++;
        out += std::to_string(open_ring);
        ring_age = 0;
      } else if (open_ring >= 0 && ++ring_age >= 3 && u(rng) < 0.45) {
        out += std::to_string(open_ring);
        open_ring = -1;
      }
      if (depth < 2 && i + 1 < length && u(rng) < 0.18) {
        out += "(";
        std::uniform_int_distribution<int> blen(1, 4);
        chain(blen(rng), polar_bias, depth + 1);
        out += ")";
      }
    }
    if (open_ring >= 0) {
      // Close on a fresh terminal atom three bonds away is not guaranteed;
      // append a two-atom tail so the closure never duplicates a bond.
      atom(polar_bias);
      atom(polar_bias);
      out += std::to_string(open_ring);
    }
  }
};

}  // namespace

std::vector<MoleculeRow> make_molecule_rows(const MoleculeConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> length(6, 26);
  std::uniform_real_distribution<double> bias(0.05, 0.45);
  std::vector<MoleculeRow> rows;
  std::vector<double> scores;
  for (Index i = 0; i < cfg.num_molecules; ++i) {
    MoleculeBuilder b{rng, {}, 0, 0, 1};
    b.chain(length(rng), bias(rng), 0);
    const double polarity = static_cast<double>(b.polar) / b.atoms;
    scores.push_back(-6.0 * polarity - 0.03 * b.atoms + 0.5 * gauss(rng));
    rows.push_back({"mol_" + std::to_string(i), 0, std::move(b.out)});
  }
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const auto cut_index = static_cast<std::size_t>((1.0 - cfg.positive_fraction) * static_cast<double>(sorted.size()));
  const double cut = sorted[std::min(cut_index, sorted.size() - 1)];
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].label = scores[i] >= cut ? 1 : 0;
  return rows;
}

void write_cora_files(const Dataset& ds, const std::filesystem::path& content_path,
                      const std::filesystem::path& cites_path) {
  const Graph& g = ds.graphs.at(0);
  std::ofstream content(content_path);
  for (Index i = 0; i < g.num_nodes; ++i) {
    content << (1000 + i);
    for (Index j = 0; j < g.feature_dim(); ++j) content << '\t' << g.node_features(i, j);
    content << "\tclass_" << g.node_labels->at(static_cast<std::size_t>(i)) << '\n';
  }
  std::ofstream cites(cites_path);
  for (const auto& e : g.edges) cites << (1000 + e.src) << '\t' << (1000 + e.dst) << '\n';
  if (!content || !cites) throw Error("write_cora_files: write failed");
}

void write_tu_files(const Dataset& ds, const std::filesystem::path& dir, const std::string& prefix,
                    Index num_node_labels) {
  std::filesystem::create_directories(dir);
  std::ofstream a(dir / (prefix + "_A.txt"));
  std::ofstream ind(dir / (prefix + "_graph_indicator.txt"));
  std::ofstream gl(dir / (prefix + "_graph_labels.txt"));
  std::ofstream nl;
  std::ofstream attr;
  const Index dim = ds.feature_dim();
  const Index attr_dim = dim - num_node_labels;
  if (num_node_labels > 0) nl.open(dir / (prefix + "_node_labels.txt"));
  if (attr_dim > 0) attr.open(dir / (prefix + "_node_attributes.txt"));
  Index offset = 0;
  for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    const Graph& g = ds.graphs[gi];
    for (Index i = 0; i < g.num_nodes; ++i) {
      ind << (gi + 1) << '\n';
      if (num_node_labels > 0) {
        Index best = 0;
        g.node_features.row(i).tail(num_node_labels).maxCoeff(&best);
        nl << best << '\n';
      }
      for (Index j = 0; j < attr_dim; ++j) attr << (j ? ", " : "") << g.node_features(i, j);
      if (attr_dim > 0) attr << '\n';
    }
    for (const auto& e : g.edges) {
      a << (offset + e.src + 1) << ", " << (offset + e.dst + 1) << '\n';
      a << (offset + e.dst + 1) << ", " << (offset + e.src + 1) << '\n';
    }
    gl << (g.graph_label.value_or(0) + 1) << '\n';
    offset += g.num_nodes;
  }
}

void write_bbbp_csv(const std::vector<MoleculeRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "name,p_np,smiles\n";
  for (const auto& r : rows) out << '"' << r.name << "\"," << r.label << ',' << r.smiles << '\n';
  if (!out) throw Error("write_bbbp_csv: write failed");
}

Dataset make_molecule_dataset(const MoleculeConfig& cfg, std::uint64_t seed) {
  Dataset ds;
  ds.name = "synthetic-bbbp";
  ds.task = Task::GraphClassification;
  ds.num_classes = 2;
  for (const auto& row : make_molecule_rows(cfg, seed)) {
    Graph g = parse_smiles(row.smiles);
    g.graph_label = row.label;
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

}  // namespace gnncomp
