#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ksb/errors.hpp"
#include "ksb/rng.hpp"

namespace ksb {

// Rooted complete binary tree with h levels, stored in level order: the root
// is node 0, the children of v are 2v+1 and 2v+2, and depth d occupies the
// contiguous range [2^d - 1, 2^{d+1} - 2]. Leaf position p is node n-1+p and
// carries label leaf_label(p) in 1..n.
//
// edge_length(v) is the length of the edge above v. Zero lengths are accepted
// so samplers can run on degenerate trees.
class Phylogeny {
 public:
  Phylogeny(int levels, std::vector<double> edge_lengths, std::vector<int> leaf_labels);

  // All edges of length tau, leaf p labeled p+1. levels may be 0.
  static Phylogeny uniform(int levels, double tau);

  int levels() const { return levels_; }
  int leaf_count() const { return 1 << levels_; }
  int node_count() const { return (2 << levels_) - 1; }

  double edge_length(int node) const { return edge_lengths_[node]; }
  const std::vector<double>& edge_lengths() const { return edge_lengths_; }
  int leaf_label(int position) const { return leaf_labels_[position]; }
  const std::vector<int>& leaf_labels() const { return leaf_labels_; }
  int leaf_position(int label) const { return label_position_[label - 1]; }
  int leaf_node(int position) const { return leaf_count() - 1 + position; }
  bool is_leaf(int node) const { return node >= leaf_count() - 1; }

  static int parent(int node) { return (node - 1) / 2; }
  static int left(int node) { return 2 * node + 1; }
  static int right(int node) { return 2 * node + 2; }
  static int depth(int node);

  bool operator==(const Phylogeny& other) const = default;

 private:
  int levels_;
  std::vector<double> edge_lengths_;
  std::vector<int> leaf_labels_;
  std::vector<int> label_position_;
};

// Uniform [f, g] branch lengths (exactly g when f == g) and a uniformly random
// leaf labeling.
Phylogeny random_homogeneous_phylogeny(int levels, double f, double g, Rng& rng);

// Same tree with children ordered by smallest descendant label.
Phylogeny canonicalize(const Phylogeny& phy);

// Path-length metric over all nodes of a phylogeny.
class TreeMetric {
 public:
  explicit TreeMetric(const Phylogeny& phy);

  double operator()(int u, int v) const { return dist_[static_cast<std::size_t>(u) * size_ + v]; }
  double between_labels(int a, int b) const;
  int size() const { return static_cast<int>(size_); }

 private:
  std::size_t size_;
  std::vector<double> dist_;
  std::vector<int> label_node_;
};

TreeMetric tree_metric(const Phylogeny& phy);

// Bipartition of the leaf labels, stored as a bitset over labels 1..n and
// normalized to the side that does not contain label 1.
using Split = std::vector<std::uint64_t>;

// Unrooted leaf-labeled binary tree. Vertices 0..n-1 are the leaves (vertex i
// has label i+1); internal vertices follow.
class Topology {
 public:
  // Degree-2 internal vertices are suppressed (a rooted input becomes
  // unrooted). Throws InvalidParameter if the result is not a tree with leaf
  // degree 1 and internal degree 3.
  Topology(int leaf_count, const std::vector<std::pair<int, int>>& edges);

  int leaf_count() const { return leaf_count_; }
  int internal_count() const { return static_cast<int>(adjacency_.size()) - leaf_count_; }
  int vertex_count() const { return static_cast<int>(adjacency_.size()); }
  const std::vector<int>& neighbors(int v) const { return adjacency_[v]; }
  std::vector<std::pair<int, int>> edges() const;

  // Nontrivial splits, one per internal edge, sorted.
  const std::vector<Split>& splits() const { return splits_; }

 private:
  int leaf_count_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<Split> splits_;
};

// Replaces the two root edges by one edge.
Topology unroot(const Phylogeny& phy);

struct TopologyComparison {
  bool equal;
  int robinson_foulds;
};

// Throws InvalidParameter on mismatched leaf sets.
TopologyComparison compare_topologies(const Topology& a, const Topology& b);
bool topologies_equal(const Topology& a, const Topology& b);

}  // namespace ksb
