#include "ksb/tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace ksb {

namespace {

Split make_split(int leaf_count) { return Split((leaf_count + 63) / 64, 0); }

void set_bit(Split& s, int label) { s[(label - 1) / 64] |= std::uint64_t{1} << ((label - 1) % 64); }

bool has_bit(const Split& s, int label) { return (s[(label - 1) / 64] >> ((label - 1) % 64)) & 1U; }

void complement(Split& s, int leaf_count) {
  for (auto& w : s) w = ~w;
  const int tail = leaf_count % 64;
  if (tail != 0) s.back() &= (std::uint64_t{1} << tail) - 1;
}

}  // namespace

int Phylogeny::depth(int node) { return std::bit_width(static_cast<unsigned>(node + 1)) - 1; }

Phylogeny::Phylogeny(int levels, std::vector<double> edge_lengths, std::vector<int> leaf_labels)
    : levels_(levels), edge_lengths_(std::move(edge_lengths)), leaf_labels_(std::move(leaf_labels)) {
  if (levels < 0 || levels > 24) throw InvalidParameter("levels must be in [0, 24]");
  const int n = 1 << levels;
  const int nodes = 2 * n - 1;
  if (static_cast<int>(edge_lengths_.size()) != nodes) {
    throw InvalidParameter("expected " + std::to_string(nodes) + " edge lengths");
  }
  edge_lengths_[0] = 0.0;
  for (int v = 1; v < nodes; ++v) {
    if (!(edge_lengths_[v] >= 0.0) || !std::isfinite(edge_lengths_[v])) {
      throw InvalidParameter("edge lengths must be finite and >= 0");
    }
  }
  if (static_cast<int>(leaf_labels_.size()) != n) {
    throw InvalidParameter("expected " + std::to_string(n) + " leaf labels");
  }
  label_position_.assign(n, -1);
  for (int p = 0; p < n; ++p) {
    const int label = leaf_labels_[p];
    if (label < 1 || label > n || label_position_[label - 1] != -1) {
      throw InvalidParameter("leaf labels must be a permutation of 1..n");
    }
    label_position_[label - 1] = p;
  }
}

Phylogeny Phylogeny::uniform(int levels, double tau) {
  if (levels < 0 || levels > 24) throw InvalidParameter("levels must be in [0, 24]");
  const int n = 1 << levels;
  std::vector<double> lengths(2 * n - 1, tau);
  std::vector<int> labels(n);
  std::iota(labels.begin(), labels.end(), 1);
  return Phylogeny(levels, std::move(lengths), std::move(labels));
}

Phylogeny random_homogeneous_phylogeny(int levels, double f, double g, Rng& rng) {
  if (!(f > 0.0) || !(f <= g) || !std::isfinite(g)) {
    throw InvalidParameter("branch length bounds need 0 < f <= g");
  }
  if (levels < 1) throw InvalidParameter("levels must be >= 1");
  const int n = 1 << levels;
  std::vector<double> lengths(2 * n - 1, g);
  if (f < g) {
    std::uniform_real_distribution<double> unif(f, g);
    for (int v = 1; v < 2 * n - 1; ++v) lengths[v] = unif(rng);
  }
  std::vector<int> labels(n);
  std::iota(labels.begin(), labels.end(), 1);
  std::shuffle(labels.begin(), labels.end(), rng);
  return Phylogeny(levels, std::move(lengths), std::move(labels));
}

Phylogeny canonicalize(const Phylogeny& phy) {
  const int nodes = phy.node_count();
  std::vector<int> min_label(nodes);
  for (int v = nodes - 1; v >= 0; --v) {
    min_label[v] = phy.is_leaf(v) ? phy.leaf_label(v - (phy.leaf_count() - 1))
                                  : std::min(min_label[Phylogeny::left(v)], min_label[Phylogeny::right(v)]);
  }
  // old_of[w] is the original node placed at new position w.
  std::vector<int> old_of(nodes);
  old_of[0] = 0;
  for (int w = 0; w < nodes; ++w) {
    const int v = old_of[w];
    if (phy.is_leaf(v)) continue;
    int a = Phylogeny::left(v);
    int b = Phylogeny::right(v);
    if (min_label[b] < min_label[a]) std::swap(a, b);
    old_of[Phylogeny::left(w)] = a;
    old_of[Phylogeny::right(w)] = b;
  }
  std::vector<double> lengths(nodes);
  for (int w = 0; w < nodes; ++w) lengths[w] = phy.edge_length(old_of[w]);
  std::vector<int> labels(phy.leaf_count());
  for (int p = 0; p < phy.leaf_count(); ++p) {
    labels[p] = phy.leaf_label(old_of[phy.leaf_node(p)] - (phy.leaf_count() - 1));
  }
  return Phylogeny(phy.levels(), std::move(lengths), std::move(labels));
}

TreeMetric::TreeMetric(const Phylogeny& phy) : size_(phy.node_count()), dist_(size_ * size_, 0.0) {
  // Distance to the root gives d(u,v) = r(u) + r(v) - 2 r(lca).
  std::vector<double> to_root(size_, 0.0);
  for (std::size_t v = 1; v < size_; ++v) {
    to_root[v] = to_root[Phylogeny::parent(static_cast<int>(v))] + phy.edge_length(static_cast<int>(v));
  }
  for (std::size_t u = 0; u < size_; ++u) {
    for (std::size_t v = u + 1; v < size_; ++v) {
      int a = static_cast<int>(u);
      int b = static_cast<int>(v);
      int da = Phylogeny::depth(a);
      int db = Phylogeny::depth(b);
      while (db > da) { b = Phylogeny::parent(b); --db; }
      while (a != b) { a = Phylogeny::parent(a); b = Phylogeny::parent(b); }
      const double d = to_root[u] + to_root[v] - 2.0 * to_root[a];
      dist_[u * size_ + v] = d;
      dist_[v * size_ + u] = d;
    }
  }
  label_node_.resize(phy.leaf_count());
  for (int p = 0; p < phy.leaf_count(); ++p) label_node_[phy.leaf_label(p) - 1] = phy.leaf_node(p);
}

double TreeMetric::between_labels(int a, int b) const {
  return (*this)(label_node_.at(a - 1), label_node_.at(b - 1));
}

TreeMetric tree_metric(const Phylogeny& phy) { return TreeMetric(phy); }

Topology::Topology(int leaf_count, const std::vector<std::pair<int, int>>& edges) : leaf_count_(leaf_count) {
  if (leaf_count < 2) throw InvalidParameter("a topology needs at least 2 leaves");
  int vertices = leaf_count;
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a == b) throw InvalidParameter("invalid edge in topology");
    vertices = std::max({vertices, a + 1, b + 1});
  }
  std::vector<std::vector<int>> adj(vertices);
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  // Suppress degree-2 internal vertices.
  std::vector<bool> removed(vertices, false);
  for (int v = leaf_count; v < vertices; ++v) {
    if (adj[v].size() != 2) continue;
    const int x = adj[v][0];
    const int y = adj[v][1];
    std::replace(adj[x].begin(), adj[x].end(), v, y);
    std::replace(adj[y].begin(), adj[y].end(), v, x);
    adj[v].clear();
    removed[v] = true;
  }
  std::vector<int> remap(vertices, -1);
  int next = 0;
  for (int v = 0; v < vertices; ++v) {
    if (!removed[v]) remap[v] = next++;
  }
  adjacency_.assign(next, {});
  std::size_t edge_count = 0;
  for (int v = 0; v < vertices; ++v) {
    if (removed[v]) continue;
    for (int w : adj[v]) adjacency_[remap[v]].push_back(remap[w]);
    edge_count += adj[v].size();
  }
  edge_count /= 2;
  for (int v = 0; v < next; ++v) {
    const auto deg = adjacency_[v].size();
    if (v < leaf_count && deg != 1) throw InvalidParameter("leaf " + std::to_string(v + 1) + " must have degree 1");
    if (v >= leaf_count && deg != 3) throw InvalidParameter("internal vertices must have degree 3");
  }
  if (edge_count + 1 != static_cast<std::size_t>(next)) throw InvalidParameter("topology is not a tree");
  if (internal_count() != leaf_count - 2) throw InvalidParameter("topology must have n-2 internal vertices");

  // Connectivity check and splits from a DFS rooted at leaf 0.
  std::vector<int> parent(next, -2);
  std::vector<int> order;
  order.reserve(next);
  std::vector<int> stack{0};
  parent[0] = -1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (int w : adjacency_[v]) {
      if (parent[w] == -2) {
        parent[w] = v;
        stack.push_back(w);
      }
    }
  }
  if (static_cast<int>(order.size()) != next) throw InvalidParameter("topology is not connected");
  std::vector<Split> below(next, make_split(leaf_count));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int v = *it;
    if (v < leaf_count) set_bit(below[v], v + 1);
    if (parent[v] >= 0) {
      auto& up = below[parent[v]];
      for (std::size_t w = 0; w < up.size(); ++w) up[w] |= below[v][w];
    }
  }
  for (int v = leaf_count; v < next; ++v) {
    // Edge (v, parent[v]) is internal when the parent is not leaf 0.
    if (parent[v] < leaf_count) continue;
    Split s = below[v];
    if (has_bit(s, 1)) complement(s, leaf_count);
    splits_.push_back(std::move(s));
  }
  std::sort(splits_.begin(), splits_.end());
}

std::vector<std::pair<int, int>> Topology::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int v = 0; v < vertex_count(); ++v) {
    for (int w : adjacency_[v]) {
      if (v < w) out.emplace_back(v, w);
    }
  }
  return out;
}

Topology unroot(const Phylogeny& phy) {
  const int n = phy.leaf_count();
  // Leaves keep vertex id label-1; internal node v maps to n + v.
  auto vertex = [&](int node) {
    return phy.is_leaf(node) ? phy.leaf_label(node - (n - 1)) - 1 : n + node;
  };
  std::vector<std::pair<int, int>> edges;
  if (phy.levels() == 0) throw InvalidParameter("cannot unroot a single-vertex tree");
  for (int v = 1; v < phy.node_count(); ++v) edges.emplace_back(vertex(Phylogeny::parent(v)), vertex(v));
  return Topology(n, edges);
}

TopologyComparison compare_topologies(const Topology& a, const Topology& b) {
  if (a.leaf_count() != b.leaf_count()) throw InvalidParameter("topologies have different leaf sets");
  const auto& sa = a.splits();
  const auto& sb = b.splits();
  std::vector<Split> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  const int rf = static_cast<int>(sa.size() + sb.size() - 2 * common.size());
  return {rf == 0, rf};
}

bool topologies_equal(const Topology& a, const Topology& b) { return compare_topologies(a, b).equal; }

}  // namespace ksb
