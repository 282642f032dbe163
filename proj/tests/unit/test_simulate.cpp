#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include <doctest.h>

#include "ksb/checks.hpp"
#include "ksb/oracles.hpp"
#include "ksb/simulate.hpp"

using namespace ksb;

TEST_CASE("zero-length edges give a monochromatic tree") {
  Rng rng = make_rng(1);
  const Phylogeny phy = Phylogeny::uniform(3, 0.0);
  const RateModel m = RateModel::potts(5);
  for (int t = 0; t < 50; ++t) {
    const auto b = broadcast_sample(phy, m, rng);
    const auto c = random_cluster_sample(phy, 5, rng);
    CHECK(std::all_of(b.begin(), b.end(), [&](State s) { return s == b[0]; }));
    CHECK(std::all_of(c.begin(), c.end(), [&](State s) { return s == c[0]; }));
  }
}

TEST_CASE("two-leaf agreement probability") {
  const double expected = (1.0 + std::exp(-1.0)) / 2.0;
  const Phylogeny phy = Phylogeny::uniform(1, 0.5);
  const RateModel m = RateModel::potts(2);
  const auto law = exact_leaf_distribution(phy, m);
  REQUIRE(law.size() == 4);
  CHECK(law[0] + law[3] == doctest::Approx(expected).epsilon(1e-12));
  // Random-cluster case analysis: both edges open, or the colors match by chance.
  CHECK(std::exp(-1.0) + (1.0 - std::exp(-1.0)) / 2.0 == doctest::Approx(expected));

  Rng rng = make_rng(2);
  const int draws = 200000;
  int agree_b = 0, agree_c = 0;
  for (int t = 0; t < draws; ++t) {
    const auto b = broadcast_sample(phy, m, rng);
    const auto c = random_cluster_sample(phy, m, rng);
    agree_b += b[1] == b[2];
    agree_c += c[1] == c[2];
  }
  const double se = std::sqrt(expected * (1 - expected) / draws);
  CHECK(std::abs(agree_b / double(draws) - expected) < 4 * se);
  CHECK(std::abs(agree_c / double(draws) - expected) < 4 * se);
}

TEST_CASE("exact leaf law against enumeration") {
  Rng rng = make_rng(3);
  for (int t = 0; t < 10; ++t) {
    const RateModel m = t % 2 ? oracle::random_gtr(3, rng) : RateModel::potts(3);
    const Phylogeny phy = random_homogeneous_phylogeny(2, 0.1, 0.8, rng);
    const auto fast = exact_leaf_distribution(phy, m);
    const auto slow = oracle::enumerate_leaf_distribution(phy, m);
    REQUIRE(fast.size() == slow.size());
    double total = 0.0;
    for (std::size_t i = 0; i < fast.size(); ++i) {
      CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-10));
      total += fast[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(exact_leaf_distribution(Phylogeny::uniform(5, 0.1), RateModel::potts(2)), InstanceTooLarge);
}

TEST_CASE("leaf law is invariant under state exchange for the symmetric model") {
  const Phylogeny phy = Phylogeny::uniform(2, 0.3);
  const auto law = exact_leaf_distribution(phy, RateModel::potts(3));
  std::vector<State> pattern(4);
  for (std::size_t idx = 0; idx < law.size(); ++idx) {
    std::size_t rest = idx;
    for (auto& s : pattern) {
      s = static_cast<State>(rest % 3);
      rest /= 3;
    }
    std::vector<State> shifted(pattern);
    for (auto& s : shifted) s = static_cast<State>((s + 1) % 3);
    CHECK(law[leaf_pattern_index(shifted, 3)] == doctest::Approx(law[idx]));
  }
}

TEST_CASE("single-node marginals follow the stationary law") {
  Rng rng = make_rng(4);
  const RateModel m = oracle::random_gtr(4, rng);
  const Phylogeny phy = Phylogeny::uniform(2, 0.4);
  const SampledData data = sample_alignment(phy, m, 100000, rng);
  std::vector<std::size_t> counts(4, 0);
  for (State s : data.leaves.row(2)) ++counts[s];
  std::vector<double> pi(m.pi().data(), m.pi().data() + 4);
  CHECK(chi_square_fit(counts, pi) > 0.001);
}

TEST_CASE("cluster sampler needs the symmetric model") {
  Rng rng = make_rng(5);
  CHECK_THROWS_AS(random_cluster_sample(Phylogeny::uniform(1, 0.1), oracle::random_gtr(3, rng), rng),
                  UnsupportedModel);
}

TEST_CASE("alignments: reproducibility, hidden rows and file round trip") {
  const Phylogeny phy = Phylogeny::uniform(2, 0.2);
  const RateModel m = RateModel::potts(4);
  Rng a = make_rng(6), b = make_rng(6);
  const SampledData x = sample_alignment(phy, m, 50, a, SamplerKind::kRandomCluster, true);
  const SampledData y = sample_alignment(phy, m, 50, b, SamplerKind::kRandomCluster, true);
  CHECK(x.leaves == y.leaves);
  REQUIRE(x.hidden.has_value());
  CHECK(x.hidden->rows() == 3);
  CHECK(x.leaves.rows() == 4);

  Rng c = make_rng(7);
  CHECK(sample_alignment(phy, m, 1, c).leaves.sites() == 1);

  std::stringstream io;
  io << "# comment\n";
  write_alignment(io, x.leaves);
  CHECK(read_alignment(io) == x.leaves);

  std::vector<std::string> labels = x.hidden->labels();
  labels.insert(labels.end(), {"4", "2", "3", "1"});
  Alignment mixed(4, 50, labels);
  for (std::size_t r = 0; r < 3; ++r) std::ranges::copy(x.hidden->row(r), mixed.row(r).begin());
  const std::array<int, 4> order{4, 2, 3, 1};
  for (std::size_t i = 0; i < order.size(); ++i) std::ranges::copy(x.leaves.row(order[i] - 1), mixed.row(3 + i).begin());
  CHECK(mixed.leaves_only() == x.leaves);
}
