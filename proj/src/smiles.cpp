#include "gnncomp/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace gnncomp {

namespace {

std::optional<int> element_index(std::string_view symbol) {
  for (std::size_t i = 0; i < kSmilesElements.size(); ++i) {
    if (kSmilesElements[i] == symbol) return static_cast<int>(i);
  }
  return std::nullopt;
}

class SmilesReader {
 public:
  explicit SmilesReader(std::string_view s) : s_(s) {}

  Graph run() {
    std::vector<Index> branch_stack;
    std::optional<Index> prev;
    bool pending_bond = false;
    std::size_t pending_bond_pos = 0;

    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '(') {
        if (!prev) fail("branch without preceding atom");
        branch_stack.push_back(*prev);
        ++pos_;
      } else if (c == ')') {
        if (branch_stack.empty()) fail("unmatched ')'");
        if (pending_bond) fail("bond symbol before ')'");
        prev = branch_stack.back();
        branch_stack.pop_back();
        ++pos_;
      } else if (c == '-' || c == '=' || c == '#' || c == ':') {
        if (!prev) fail("bond without preceding atom");
        if (pending_bond) fail("consecutive bond symbols");
        pending_bond = true;
        pending_bond_pos = pos_;
        ++pos_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        if (!prev) fail("ring closure without preceding atom");
        const std::size_t at = pos_;
        const int digit = read_ring_number();
        ring_closure(digit, *prev, at);
        pending_bond = false;
      } else if (c == '[') {
        const Index atom = bracket_atom();
        attach(prev, atom);
        prev = atom;
        pending_bond = false;
      } else if (std::isalpha(static_cast<unsigned char>(c))) {
        const Index atom = organic_atom();
        attach(prev, atom);
        prev = atom;
        pending_bond = false;
      } else {
        fail(std::string("unsupported token '") + c + "'");
      }
    }
    if (pending_bond) fail_at("dangling bond symbol", pending_bond_pos);
    if (!branch_stack.empty()) fail_at("unmatched '('", s_.size());
    if (!open_rings_.empty()) {
      fail_at("unmatched ring closure " + std::to_string(open_rings_.begin()->first),
              open_rings_.begin()->second.second);
    }
    if (elements_.empty()) fail_at("empty SMILES", 0);
    return build();
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { fail_at(msg, pos_); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const {
    throw ParseError("smiles: " + msg + " at position " + std::to_string(at), at);
  }

  void attach(std::optional<Index> prev, Index atom) {
    if (prev) add_bond(*prev, atom);
  }

  void add_bond(Index a, Index b) {
    if (a == b) fail("ring closure bonds atom to itself");
    const auto key = std::minmax(a, b);
    if (!bond_set_.insert(key).second) fail("duplicate bond");
    bonds_.push_back({key.first, key.second});
  }

  int read_ring_number() {
    if (s_[pos_] == '%') {
      if (pos_ + 2 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s_[pos_ + 2]))) {
        fail("'%' must be followed by two digits");
      }
      const int n = (s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0');
      pos_ += 3;
      return n;
    }
    return s_[pos_++] - '0';
  }

  void ring_closure(int digit, Index atom, std::size_t at) {
    auto it = open_rings_.find(digit);
    if (it == open_rings_.end()) {
      open_rings_.emplace(digit, std::make_pair(atom, at));
    } else {
      const Index other = it->second.first;
      open_rings_.erase(it);
      add_bond(other, atom);
    }
  }

  Index new_atom(int element) {
    elements_.push_back(element);
    return static_cast<Index>(elements_.size() - 1);
  }

  Index organic_atom() {
    const char c = s_[pos_];
    // Two-letter organic symbols first.
    if (c == 'C' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'l') {
      pos_ += 2;
      return new_atom(*element_index("Cl"));
    }
    if (c == 'B' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'r') {
      pos_ += 2;
      return new_atom(*element_index("Br"));
    }
    std::string sym(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    const bool aromatic = std::islower(static_cast<unsigned char>(c));
    if (aromatic && sym != "B" && sym != "C" && sym != "N" && sym != "O" && sym != "P" && sym != "S") {
      fail(std::string("unsupported token '") + c + "'");
    }
    auto idx = element_index(sym);
    if (!idx) fail(std::string("unsupported token '") + c + "'");
    ++pos_;
    return new_atom(*idx);
  }

  Index bracket_atom() {
    const std::size_t open = pos_;
    const auto close = s_.find(']', pos_);
    if (close == std::string_view::npos) fail("unterminated bracket atom");
    std::string_view body = s_.substr(pos_ + 1, close - pos_ - 1);
    std::size_t i = 0;
    while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;  // isotope
    if (i >= body.size() || !std::isalpha(static_cast<unsigned char>(body[i]))) {
      fail_at("bracket atom without element", open);
    }
    std::string sym(1, body[i]);
    const bool aromatic = std::islower(static_cast<unsigned char>(body[i]));
    ++i;
    if (!aromatic && i < body.size() && std::islower(static_cast<unsigned char>(body[i]))) {
      sym.push_back(body[i]);
      ++i;
    }
    if (aromatic) sym[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sym[0])));
    auto idx = element_index(sym);
    if (!idx) fail_at("unsupported element '" + sym + "'", open);
    for (; i < body.size(); ++i) {
      const char c = body[i];
      if (c == '@') fail_at("unsupported token '@' (stereo)", open + 1 + i);
      if (c == 'H' || c == '+' || c == '-' || std::isdigit(static_cast<unsigned char>(c))) continue;
      fail_at(std::string("unsupported token '") + c + "' in bracket atom", open + 1 + i);
    }
    pos_ = close + 1;
    return new_atom(*idx);
  }

  Graph build() const {
    Graph g;
    g.num_nodes = static_cast<Index>(elements_.size());
    g.edges = bonds_;
    g.node_features = Matrix::Zero(g.num_nodes, kSmilesFeatureDim);
    const auto deg = g.degrees();
    for (Index i = 0; i < g.num_nodes; ++i) {
      g.node_features(i, elements_[static_cast<std::size_t>(i)]) = 1.0f;
      g.node_features(i, kSmilesFeatureDim - 1) = static_cast<float>(deg[static_cast<std::size_t>(i)]);
    }
    return g;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::vector<int> elements_;
  std::vector<Edge> bonds_;
  std::set<std::pair<Index, Index>> bond_set_;
  std::map<int, std::pair<Index, std::size_t>> open_rings_;
};

}  // namespace

Graph parse_smiles(std::string_view smiles) { return SmilesReader(smiles).run(); }

}  // namespace gnncomp
