#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <doctest.h>

#include "ksb/metric.hpp"
#include "ksb/simulate.hpp"
#include "ksb/tree.hpp"

using namespace ksb;

namespace {

// Metric over four vertices from a 4x4 table, with an effectively open gate.
DistortedMetric quartet_metric(const std::array<std::array<double, 4>, 4>& d, double D = 100.0) {
  std::vector<double> values;
  for (const auto& row : d) values.insert(values.end(), row.begin(), row.end());
  return DistortedMetric({"a", "b", "c", "d"}, values, D, 20.0);
}

// ab|cd with pendant edges 0.1 and an internal edge 0.05.
DistortedMetric ab_cd() {
  return quartet_metric({{{0, 0.2, 0.25, 0.25}, {0.2, 0, 0.25, 0.25}, {0.25, 0.25, 0, 0.2}, {0.25, 0.25, 0.2, 0}}});
}

DistortedMetric leaf_metric(const Phylogeny& phy, double D = 100.0) {
  const TreeMetric t(phy);
  const int n = phy.leaf_count();
  std::vector<std::string> labels;
  std::vector<double> values;
  for (int a = 1; a <= n; ++a) {
    labels.push_back(std::to_string(a));
    for (int b = 1; b <= n; ++b) values.push_back(t.between_labels(a, b));
  }
  return DistortedMetric(labels, values, D, 20.0);
}

// The accepted split as a pair of sides, for comparison across labelings.
std::set<std::set<int>> accepted(const std::array<bool, 3>& ind, const std::array<int, 4>& v) {
  std::set<std::set<int>> out;
  if (ind[0]) out = {{v[0], v[1]}, {v[2], v[3]}};
  if (ind[1]) out = {{v[0], v[2]}, {v[1], v[3]}};
  if (ind[2]) out = {{v[0], v[3]}, {v[1], v[2]}};
  return out;
}

}  // namespace

TEST_CASE("distance estimate") {
  const std::vector<State> u{0, 1, 0, 1}, same{0, 1, 0, 1}, one{0, 1, 0, 0};
  CHECK(estimate_distance(u, same, 2) == 0.0);
  CHECK(estimate_distance(u, one, 2) == doctest::Approx(std::log(2.0)));
  CHECK(std::isinf(estimate_distance(std::vector<State>{0, 1}, std::vector<State>{1, 1}, 2)));
  CHECK_THROWS_AS(estimate_distance(u, std::vector<State>{0}, 2), InvalidParameter);
  CHECK(distance_from_disagreements(1, 4, 2) == doctest::Approx(std::log(2.0)));

  // Site order does not matter.
  Rng rng = make_rng(30);
  const SampledData data = sample_alignment(Phylogeny::uniform(1, 0.3), RateModel::potts(4), 500, rng);
  std::vector<State> a(data.leaves.row(0).begin(), data.leaves.row(0).end());
  std::vector<State> b(data.leaves.row(1).begin(), data.leaves.row(1).end());
  const double before = estimate_distance(a, b, 4);
  std::vector<std::size_t> order(a.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<State> pa, pb;
  for (auto i : order) {
    pa.push_back(a[i]);
    pb.push_back(b[i]);
  }
  CHECK(estimate_distance(pa, pb, 4) == before);
}

TEST_CASE("distance estimate converges and its standard error matches the spread") {
  Rng rng = make_rng(31);
  const Phylogeny phy = Phylogeny::uniform(1, 0.3);
  const RateModel m = RateModel::potts(2);
  double previous = kInfinity;
  for (std::size_t k : {100u, 1000u, 10000u}) {
    std::vector<double> errors, estimates;
    for (int t = 0; t < 200; ++t) {
      const Alignment aln = sample_alignment(phy, m, k, rng).leaves;
      const double d = estimate_distance(aln.row(0), aln.row(1), 2);
      estimates.push_back(d);
      errors.push_back(std::abs(d - 0.6));
    }
    std::nth_element(errors.begin(), errors.begin() + 100, errors.end());
    CHECK(errors[100] < previous);
    previous = errors[100];
    if (k == 10000) {
      double mean = 0.0, var = 0.0;
      for (double d : estimates) mean += d / estimates.size();
      for (double d : estimates) var += (d - mean) * (d - mean) / (estimates.size() - 1);
      CHECK(std::sqrt(var) == doctest::Approx(distance_stderr(0.6, 2, k)).epsilon(0.15));
    }
  }
}

TEST_CASE("four-point values") {
  const DistortedMetric m = ab_cd();
  CHECK(four_point_value(m, 0, 1, 2, 3) == doctest::Approx(0.05));
  CHECK(four_point_value(m, 0, 2, 1, 3) == doctest::Approx(-0.05));
  CHECK(four_point_split(m, 0, 1, 2, 3).pairing == Pairing::kAbCd);

  const DistortedMetric star = quartet_metric({{{0, 0.2, 0.2, 0.2}, {0.2, 0, 0.2, 0.2}, {0.2, 0.2, 0, 0.2}, {0.2, 0.2, 0.2, 0}}});
  CHECK(four_point_split(star, 0, 1, 2, 3).pairing == Pairing::kAdBc);

  const DistortedMetric gated = quartet_metric(
      {{{0, 0.2, 0.25, 0.25}, {0.2, 0, 0.25, kInfinity}, {0.25, 0.25, 0, 0.2}, {0.25, kInfinity, 0.2, 0}}});
  CHECK(std::isinf(four_point_value(gated, 0, 1, 2, 3)));
  CHECK(four_point_split(gated, 0, 1, 2, 3).pairing == Pairing::kUndetermined);
  // Gate D + ln(W/4) = 0.22 sits below the quartet diameter 0.25.
  const DistortedMetric m2 = quartet_metric(
      {{{0, 0.2, 0.25, 0.25}, {0.2, 0, 0.25, 0.25}, {0.25, 0.25, 0, 0.2}, {0.25, 0.25, 0.2, 0}}}, 0.22 - std::log(5.0));
  CHECK(m2.gate() == doctest::Approx(0.22));
  CHECK(quartet_diameter(m2, 0, 1, 2, 3) == doctest::Approx(0.25));
  CHECK(std::isinf(four_point_value(m2, 0, 1, 2, 3)));
  CHECK(fp_indicator(m2, 0, 1, 2, 3, 0.01) == std::array<bool, 3>{false, false, false});
  CHECK(split_indicator(m2, 0, 1, 2, 3, 0.01) == std::array<bool, 3>{false, false, false});
}

TEST_CASE("four-point identities on random metrics") {
  Rng rng = make_rng(32);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    std::array<std::array<double, 4>, 4> d{};
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) d[i][j] = d[j][i] = u(rng);
    }
    const DistortedMetric m = quartet_metric(d);
    CHECK(four_point_value(m, 0, 1, 2, 3) == doctest::Approx(-four_point_value(m, 0, 2, 1, 3)));
  }
}

TEST_CASE("four-point split recovers every induced quartet of a tree metric") {
  Rng rng = make_rng(33);
  const Phylogeny phy = random_homogeneous_phylogeny(3, 0.1, 0.5, rng);
  const DistortedMetric m = leaf_metric(phy);
  const Topology topo = unroot(phy);
  // Induced quartet ab|cd holds iff some split separates {a, b} from {c, d}.
  auto side = [&](const Split& s, int label) { return (s[(label - 1) / 64] >> ((label - 1) % 64)) & 1; };
  auto induced = [&](int a, int b, int c, int d) {
    for (const Split& s : topo.splits()) {
      if (side(s, a) == side(s, b) && side(s, c) == side(s, d) && side(s, a) != side(s, c)) return true;
    }
    return false;
  };
  for (int a = 0; a < 8; ++a) {
    for (int b = a + 1; b < 8; ++b) {
      for (int c = b + 1; c < 8; ++c) {
        for (int d = c + 1; d < 8; ++d) {
          const Pairing p = four_point_split(m, a, b, c, d).pairing;
          const Pairing expected = induced(a + 1, b + 1, c + 1, d + 1)   ? Pairing::kAbCd
                                   : induced(a + 1, c + 1, b + 1, d + 1) ? Pairing::kAcBd
                                                                         : Pairing::kAdBc;
          CHECK(p == expected);
        }
      }
    }
  }
}

TEST_CASE("threshold indicators") {
  const DistortedMetric m = ab_cd();
  CHECK(fp_indicator(m, 0, 1, 2, 3, 0.05)[0]);
  // F = 0.01 against f/2 = 0.025.
  const DistortedMetric weak = quartet_metric(
      {{{0, 0.2, 0.21, 0.21}, {0.2, 0, 0.21, 0.21}, {0.21, 0.21, 0, 0.2}, {0.21, 0.21, 0.2, 0}}});
  CHECK(four_point_value(weak, 0, 1, 2, 3) == doctest::Approx(0.01));
  CHECK_FALSE(fp_indicator(weak, 0, 1, 2, 3, 0.05)[0]);
  CHECK(split_indicator(m, 0, 1, 2, 3, 0.05) == std::array<bool, 3>{true, false, false});
}

TEST_CASE("split indicator does not depend on how the quartet is listed") {
  Rng rng = make_rng(34);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (int t = 0; t < 200; ++t) {
    std::array<std::array<double, 4>, 4> d{};
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) d[i][j] = d[j][i] = u(rng);
    }
    const DistortedMetric m = quartet_metric(d);
    std::array<int, 4> v{0, 1, 2, 3};
    const auto reference = accepted(split_indicator(m, 0, 1, 2, 3, 0.1), v);
    while (std::next_permutation(v.begin(), v.end())) {
      CHECK(accepted(split_indicator(m, v[0], v[1], v[2], v[3], 0.1), v) == reference);
    }
  }
}

TEST_CASE("distance table output") {
  const DistortedMetric m = quartet_metric(
      {{{0, 0.2, 0.25, 0.25}, {0.2, 0, 0.25, kInfinity}, {0.25, 0.25, 0, 0.2}, {0.25, kInfinity, 0.2, 0}}});
  std::ostringstream out;
  write_distance_tsv(out, m);
  const std::string text = out.str();
  CHECK(text.rfind("a\tb\tc\td\n", 0) == 0);
  CHECK(text.find("inf") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("concentration of short distances") {
  Rng rng = make_rng(35);
  const ConcentrationReport r =
      distance_concentration_check(Phylogeny::uniform(1, 0.2), RateModel::potts(2), 4000, 1.0, 0.05, 20.0, 200, rng);
  CHECK(r.short_pairs == 1);
  CHECK(r.short_rate >= 0.99);
  const ConcentrationReport zero =
      distance_concentration_check(Phylogeny::uniform(1, 0.0), RateModel::potts(2), 100, 1.0, 1e-12, 20.0, 20, rng);
  CHECK(zero.short_rate == 1.0);
}
