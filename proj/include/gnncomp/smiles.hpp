#pragma once

#include <array>
#include <string_view>

#include "gnncomp/graph.hpp"

namespace gnncomp {

/// Elements accepted by the SMILES reader, in one-hot feature order.
inline constexpr std::array<std::string_view, 10> kSmilesElements = {
    "B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"};

/// Feature width of SMILES graphs: element one-hot plus heavy-atom degree.
inline constexpr Index kSmilesFeatureDim = kSmilesElements.size() + 1;

/// Parses the supported SMILES subset (organic-subset and bracket atoms,
/// lowercase aromatic atoms read as their element, bonds - = # :, branches,
/// ring closures as digits or %nn). Throws ParseError with the character
/// offset of the offending token.
Graph parse_smiles(std::string_view smiles);

}  // namespace gnncomp
