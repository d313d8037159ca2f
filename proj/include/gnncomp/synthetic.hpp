#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gnncomp/graph.hpp"

namespace gnncomp {

/// Citation-network stand-in. Nodes sit in a latent space clustered by class;
/// bag-of-words features and citation edges both follow latent proximity.
/// Defaults reproduce Cora's node/edge/feature/class counts and class sizes.
struct CitationConfig {
  std::vector<Index> class_sizes = {818, 426, 418, 351, 298, 217, 180};
  Index num_features = 1433;
  Index num_edges = 5278;
  int latent_dim = 8;
  double class_spread = 1.0;      // distance scale between class centres
  double node_spread = 0.75;      // per-node scatter around its class centre
  double words_per_node = 18.0;
  double topical_word_fraction = 0.45;
  double word_temperature = 0.6;
  double edge_temperature = 0.1;
  int edge_candidates = 48;
};

/// Protein-like graph classification stand-in: backbone chains with spatial
/// contacts, three node types, one continuous attribute. Defaults mirror
/// PROTEINS' graph count, class balance and mean size.
struct ProteinConfig {
  Index num_graphs = 1113;
  double class1_fraction = 450.0 / 1113.0;
  double mean_nodes = 39.0;
  double contact_radius = 1.6;
  double class_separation = 0.4;
};

struct MoleculeRow {
  std::string name;
  int label = 0;
  std::string smiles;
};

/// Molecule stand-in: random SMILES in the supported subset with a label
/// driven by polarity and size (plus noise).
struct MoleculeConfig {
  Index num_molecules = 2039;
  double positive_fraction = 0.76;
};

Dataset make_citation_dataset(const CitationConfig& config, std::uint64_t seed);
Dataset make_protein_dataset(const ProteinConfig& config, std::uint64_t seed);
std::vector<MoleculeRow> make_molecule_rows(const MoleculeConfig& config, std::uint64_t seed);
/// Parses the generated rows directly into a graph classification dataset.
Dataset make_molecule_dataset(const MoleculeConfig& config, std::uint64_t seed);

/// Writers for the on-disk formats read by load_cora / load_tu / load_bbbp.
void write_cora_files(const Dataset& dataset, const std::filesystem::path& content_path,
                      const std::filesystem::path& cites_path);
void write_tu_files(const Dataset& dataset, const std::filesystem::path& dir,
                    const std::string& prefix, Index num_node_labels);
void write_bbbp_csv(const std::vector<MoleculeRow>& rows, const std::filesystem::path& path);

}  // namespace gnncomp
