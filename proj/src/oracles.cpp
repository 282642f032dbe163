#include "ksb/oracles.hpp"

#include <cmath>

namespace ksb::oracle {

Matrix series_expm(const Matrix& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Matrix scaled = a / std::ldexp(1.0, squarings);
  Matrix result = Matrix::Identity(a.rows(), a.cols());
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  for (int j = 1; j < 40; ++j) {
    term = term * scaled / static_cast<double>(j);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-20) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

RateModel random_gtr(int q, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  Vector pi(q);
  for (int i = 0; i < q; ++i) pi(i) = unif(rng);
  pi /= pi.sum();
  Matrix rate = Matrix::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) {
      const double s = unif(rng);
      rate(i, j) = s * pi(j);
      rate(j, i) = s * pi(i);
    }
  }
  for (int i = 0; i < q; ++i) rate(i, i) = -rate.row(i).sum();
  return validate_gtr(rate, pi).model;
}

namespace {

std::vector<Matrix> edge_transitions(const Phylogeny& phy, const RateModel& model) {
  std::vector<Matrix> p(phy.node_count());
  for (int v = 1; v < phy.node_count(); ++v) p[v] = series_expm(model.rate() * phy.edge_length(v));
  return p;
}

// Calls visit(states) for every assignment of states to all nodes.
template <class Visit>
void for_each_assignment(int nodes, int q, Visit visit) {
  std::vector<int> states(nodes, 0);
  while (true) {
    visit(states);
    int i = 0;
    while (i < nodes && ++states[i] == q) states[i++] = 0;
    if (i == nodes) return;
  }
}

}  // namespace

std::vector<double> enumerate_leaf_distribution(const Phylogeny& phy, const RateModel& model) {
  const int q = model.q();
  const int n = phy.leaf_count();
  const auto p = edge_transitions(phy, model);
  std::size_t patterns = 1;
  for (int a = 0; a < n; ++a) patterns *= q;
  std::vector<double> out(patterns, 0.0);
  for_each_assignment(phy.node_count(), q, [&](const std::vector<int>& s) {
    double w = model.pi()(s[0]);
    for (int v = 1; v < phy.node_count(); ++v) w *= p[v](s[Phylogeny::parent(v)], s[v]);
    std::size_t index = 0, weight = 1;
    for (int label = 1; label <= n; ++label) {
      index += static_cast<std::size_t>(s[phy.leaf_node(phy.leaf_position(label))]) * weight;
      weight *= q;
    }
    out[index] += w;
  });
  return out;
}

Vector enumerate_root_posterior(const Phylogeny& phy, const RateModel& model,
                                std::span<const State> leaves_by_label) {
  const int q = model.q();
  const int n = phy.leaf_count();
  const int internal = n - 1;
  const auto p = edge_transitions(phy, model);
  Vector joint = Vector::Zero(q);
  std::vector<int> s(phy.node_count());
  for (int position = 0; position < n; ++position) {
    s[phy.leaf_node(position)] = leaves_by_label[phy.leaf_label(position) - 1];
  }
  for_each_assignment(internal, q, [&](const std::vector<int>& inner) {
    for (int v = 0; v < internal; ++v) s[v] = inner[v];
    double w = model.pi()(s[0]);
    for (int v = 1; v < phy.node_count(); ++v) w *= p[v](s[Phylogeny::parent(v)], s[v]);
    joint(s[0]) += w;
  });
  return joint / joint.sum();
}

double path_length(const Phylogeny& phy, int u, int v) {
  double total = 0.0;
  while (u != v) {
    if (Phylogeny::depth(u) >= Phylogeny::depth(v)) {
      total += phy.edge_length(u);
      u = Phylogeny::parent(u);
    } else {
      total += phy.edge_length(v);
      v = Phylogeny::parent(v);
    }
  }
  return total;
}

namespace {

bool qualifies(std::span<const State> leaves, int levels, int node, int depth, int deepest, int l, State state) {
  const int first_leaf = (1 << levels) - 1;
  if (depth == deepest) {
    // Every leaf below `node`.
    int lo = node, hi = node;
    while (lo < first_leaf) {
      lo = 2 * lo + 1;
      hi = 2 * hi + 2;
    }
    for (int leaf = lo; leaf <= hi; ++leaf) {
      if (leaves[leaf - first_leaf] == state) return true;
    }
    return false;
  }
  // Descendants exactly l levels down.
  int lo = node, hi = node;
  for (int s = 0; s < l; ++s) {
    lo = 2 * lo + 1;
    hi = 2 * hi + 2;
  }
  int count = 0;
  for (int w = lo; w <= hi && count < 2; ++w) count += qualifies(leaves, levels, w, depth + l, deepest, l, state);
  return count >= 2;
}

}  // namespace

bool recursive_diluted_event(std::span<const State> leaves, int levels, State state, int l) {
  if (levels == 0) return leaves[0] == state;
  const int deepest = (levels / l) * l;
  return qualifies(leaves, levels, 0, 0, deepest, l, state);
}

}  // namespace ksb::oracle
