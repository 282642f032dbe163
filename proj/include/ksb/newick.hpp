#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ksb/tree.hpp"

namespace ksb {

// Syntax tree of one Newick string.
struct NewickNode {
  std::string label;
  std::optional<double> length;
  std::vector<NewickNode> children;
};

// Parses a single `;`-terminated tree. Throws ParseError with the byte offset.
NewickNode parse_newick_syntax(std::string_view text);

// A bifurcating root with branch lengths on every edge and a complete binary
// shape gives a Phylogeny; anything else binary gives a Topology.
std::variant<Phylogeny, Topology> parse_newick(std::string_view text);
Phylogeny parse_phylogeny(std::string_view text);
Topology parse_topology(std::string_view text);

// Canonical forms: children ordered by smallest descendant label, lengths with
// 9 significant digits. Topologies are rooted at the internal vertex next to
// leaf 1, giving a trifurcating root.
std::string to_newick(const Phylogeny& phy);
std::string to_newick(const Topology& topo);

// First non-comment line of a `.nwk` stream. Lines starting with '#' are
// skipped.
std::string read_newick_line(std::istream& in);
std::vector<std::string> read_newick_lines(std::istream& in);

}  // namespace ksb
