#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <set>

#include <doctest.h>

#include "ksb/metric.hpp"
#include "ksb/reconstruct.hpp"
#include "ksb/simulate.hpp"
#include "ksb/tree.hpp"

using namespace ksb;

namespace {

// Descendant label set of every node.
std::vector<std::set<int>> clades(const Phylogeny& phy) {
  std::vector<std::set<int>> out(phy.node_count());
  for (int v = phy.node_count() - 1; v >= 0; --v) {
    if (phy.is_leaf(v)) {
      out[v] = {phy.leaf_label(v - (phy.leaf_count() - 1))};
    } else {
      out[v] = out[Phylogeny::left(v)];
      out[v].insert(out[Phylogeny::right(v)].begin(), out[Phylogeny::right(v)].end());
    }
  }
  return out;
}

// Exact distances between reconstructed vertices, looked up by clade, plus
// an arbitrary per-vertex offset.
DistanceHook exact_hook(const Phylogeny& phy, std::function<double(const std::set<int>&)> offset = nullptr) {
  auto metric = std::make_shared<TreeMetric>(phy);
  auto sets = std::make_shared<std::vector<std::set<int>>>(clades(phy));
  auto node_of = [sets](std::span<const int> labels) {
    const std::set<int> s(labels.begin(), labels.end());
    const auto it = std::find(sets->begin(), sets->end(), s);
    REQUIRE(it != sets->end());
    return static_cast<int>(it - sets->begin());
  };
  return [=](std::span<const int> u, std::span<const int> v) {
    double d = (*metric)(node_of(u), node_of(v));
    if (offset) d += offset(std::set<int>(u.begin(), u.end())) + offset(std::set<int>(v.begin(), v.end()));
    return d;
  };
}

Alignment placeholder(int n) {
  std::vector<std::string> labels;
  for (int a = 1; a <= n; ++a) labels.push_back(std::to_string(a));
  return Alignment(2, 1, labels);
}

ReconstructParams open_gate(DistanceHook hook) {
  ReconstructParams p;
  p.D = {kInfinity};
  p.f_min = 0.1;
  p.distance_hook = std::move(hook);
  return p;
}

}  // namespace

TEST_CASE("cherries from a single quartet") {
  const std::vector<QuartetSplit> splits{{{0, 1, 2, 3}, Pairing::kAbCd}};
  auto pairs = identify_cherries(splits, 4);
  std::sort(pairs.begin(), pairs.end());
  CHECK(pairs == std::vector<std::pair<int, int>>{{0, 1}, {2, 3}});
  CHECK(identify_cherries(std::vector<QuartetSplit>{}, 2) == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK_THROWS_AS(identify_cherries(std::vector<QuartetSplit>{}, 4), MatchingFailure);
}

TEST_CASE("cherries of a three-cherry tree from all quartets") {
  // Cherries (0,1), (2,3), (4,5) around one central vertex.
  std::vector<double> d(36, 0.0);
  for (int u = 0; u < 6; ++u) {
    for (int v = 0; v < 6; ++v) {
      if (u != v) d[u * 6 + v] = u / 2 == v / 2 ? 0.2 : 0.6;
    }
  }
  const DistortedMetric m({"0", "1", "2", "3", "4", "5"}, d, 100.0, 20.0);
  std::vector<QuartetSplit> splits;
  for (int a = 0; a < 6; ++a) {
    for (int b = a + 1; b < 6; ++b) {
      for (int c = b + 1; c < 6; ++c) {
        for (int e = c + 1; e < 6; ++e) {
          const auto ind = split_indicator(m, a, b, c, e, 0.1);
          const Pairing p[3] = {Pairing::kAbCd, Pairing::kAcBd, Pairing::kAdBc};
          for (int i = 0; i < 3; ++i) {
            if (ind[i]) splits.push_back({{a, b, c, e}, p[i]});
          }
        }
      }
    }
  }
  auto pairs = identify_cherries(splits, 6);
  std::sort(pairs.begin(), pairs.end());
  CHECK(pairs == std::vector<std::pair<int, int>>{{0, 1}, {2, 3}, {4, 5}});
}

TEST_CASE("relations table") {
  SplitRelations r(4);
  r.add(0, 1, 2, 3);
  CHECK(r.together(0, 1) == 1);
  CHECK(r.together(1, 0) == 1);
  CHECK(r.separated(0, 2) == 1);
  CHECK(r.table().size() == 6);
}

TEST_CASE("reconstruction from exact metrics") {
  Rng rng = make_rng(40);
  for (int h = 2; h <= 4; ++h) {
    for (int t = 0; t < 20; ++t) {
      const Phylogeny phy = random_homogeneous_phylogeny(h, 0.1, 0.6, rng);
      const auto result = reconstruct_homogeneous(placeholder(phy.leaf_count()), open_gate(exact_hook(phy)), rng);
      CHECK(topologies_equal(result.topology, unroot(phy)));
      REQUIRE(result.levels.size() == static_cast<std::size_t>(h));
      for (int level = 0; level < h; ++level) CHECK(result.levels[level].vertices == (1 << (h - level)));
    }
  }
}

TEST_CASE("per-vertex offsets leave the reconstruction unchanged") {
  Rng rng = make_rng(41);
  auto offset = [](const std::set<int>& s) { return 0.37 * std::sin(std::accumulate(s.begin(), s.end(), 0.0)) + 0.4; };
  for (int t = 0; t < 20; ++t) {
    const Phylogeny phy = random_homogeneous_phylogeny(3, 0.1, 0.6, rng);
    const auto result =
        reconstruct_homogeneous(placeholder(phy.leaf_count()), open_gate(exact_hook(phy, offset)), rng);
    CHECK(topologies_equal(result.topology, unroot(phy)));
  }
}

TEST_CASE("relabeling leaves relabels the output") {
  Rng rng = make_rng(42);
  const Phylogeny phy = random_homogeneous_phylogeny(3, 0.1, 0.6, rng);
  std::vector<int> perm(8);
  std::iota(perm.begin(), perm.end(), 1);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> labels;
  for (int a : phy.leaf_labels()) labels.push_back(perm[a - 1]);
  const Phylogeny moved(phy.levels(), phy.edge_lengths(), labels);
  const Topology a = reconstruct_homogeneous(placeholder(8), open_gate(exact_hook(phy)), rng).topology;
  const Topology b = reconstruct_homogeneous(placeholder(8), open_gate(exact_hook(moved)), rng).topology;
  std::vector<std::pair<int, int>> edges;
  for (auto [u, v] : a.edges()) {
    edges.emplace_back(u < 8 ? perm[u] - 1 : u, v < 8 ? perm[v] - 1 : v);
  }
  CHECK(topologies_equal(Topology(8, edges), b));
}

TEST_CASE("reconstruction from sequences") {
  Rng rng = make_rng(43);
  const double g = 0.2;
  int ok = 0;
  for (int t = 0; t < 10; ++t) {
    const Phylogeny phy = random_homogeneous_phylogeny(4, g, g, rng);
    const Alignment aln = sample_alignment(phy, RateModel::potts(2), 2000, rng).leaves;
    const ReconstructParams p = default_params(2, g, g, 4, 2000, rng, 4000);
    try {
      ok += topologies_equal(reconstruct_homogeneous(aln, p, rng).topology, unroot(phy));
    } catch (const ReconstructionFailure&) {
    }
  }
  CHECK(ok >= 8);

  // One site carries almost nothing; the run must end cleanly either way.
  const Phylogeny phy = random_homogeneous_phylogeny(3, g, g, rng);
  const Alignment one = sample_alignment(phy, RateModel::potts(2), 1, rng).leaves;
  try {
    const auto result = reconstruct_homogeneous(one, default_params(2, g, g, 3, 1, rng, 1000), rng);
    CHECK(result.topology.leaf_count() == 8);
  } catch (const ReconstructionFailure& e) {
    CHECK(e.level() >= 0);
    CHECK(e.vertex_leaves().size() >= 2);
  }
}

TEST_CASE("parameter defaults") {
  CHECK(choose_estimator(0.2) == RootEstimator::kMajority);
  CHECK(choose_estimator(0.5) == RootEstimator::kDiluted);
  CHECK(choose_estimator(0.9) == RootEstimator::kMajority);

  Rng rng = make_rng(44);
  const double g = 0.2;
  const auto gates = default_gate_schedule(2, g, g, 4, 4000, RootEstimator::kMajority, 1, 4000, rng);
  REQUIRE(gates.size() == 4);
  // Leaf level: between cousins (4g) and the next class (6g).
  CHECK(gates[0] > 4 * g);
  CHECK(gates[0] < 6 * g);
  for (std::size_t i = 1; i < gates.size(); ++i) CHECK(gates[i] > gates[0]);

  const ReconstructParams p = default_params(2, g, g, 4, 4000, rng, 4000);
  CHECK(p.estimator == RootEstimator::kMajority);
  REQUIRE(p.D.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(p.D[i] + std::log(p.W / 4.0) == doctest::Approx(gates[i]).epsilon(0.05));
  const ReconstructParams forced = default_params(2, g, g, 4, 4000, rng, 4000, RootEstimator::kDiluted, 2);
  CHECK(forced.estimator == RootEstimator::kDiluted);
  CHECK(forced.l == 2);
}
