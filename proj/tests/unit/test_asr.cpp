#include <cmath>
#include <vector>

#include <doctest.h>

#include "ksb/asr.hpp"
#include "ksb/checks.hpp"
#include "ksb/oracles.hpp"
#include "ksb/reconstruct.hpp"

using namespace ksb;

namespace {

std::vector<std::size_t> estimator_counts(const std::vector<State>& leaves, int levels, int l, int q, int draws,
                                          Rng& rng) {
  std::vector<std::size_t> counts(q, 0);
  for (int t = 0; t < draws; ++t) ++counts[diluted_root_estimator(leaves, levels, l, q, rng)];
  return counts;
}

}  // namespace

TEST_CASE("diluted event on small trees") {
  const std::vector<State> mono{2, 2, 2, 2};
  CHECK(diluted_event(mono, 2, 2, 1));
  CHECK_FALSE(diluted_event(mono, 2, 0, 1));
  const std::vector<State> halves{0, 0, 1, 1};
  CHECK_FALSE(diluted_event(halves, 2, 0, 1));
  CHECK_FALSE(diluted_event(halves, 2, 1, 1));
  CHECK(diluted_event(halves, 2, 0, 2));
  CHECK(diluted_event(halves, 2, 1, 2));
  CHECK(diluted_qualifying_states(halves, 2, 3, 2) == std::vector<State>{0, 1});
}

TEST_CASE("diluted event against the node recursion") {
  Rng rng = make_rng(12);
  for (int levels = 0; levels <= 7; ++levels) {
    for (int l = 1; l <= 4; ++l) {
      for (int q : {2, 3}) {
        std::uniform_int_distribution<int> state(0, q - 1);
        std::bernoulli_distribution copy(0.7);
        for (int t = 0; t < 40; ++t) {
          // Correlated leaves so that the event is neither always nor never true.
          std::vector<State> leaves(std::size_t{1} << levels);
          leaves[0] = static_cast<State>(state(rng));
          for (std::size_t i = 1; i < leaves.size(); ++i) {
            leaves[i] = copy(rng) ? leaves[i - 1] : static_cast<State>(state(rng));
          }
          for (int s = 0; s < q; ++s) {
            CHECK(diluted_event(leaves, levels, static_cast<State>(s), l) ==
                  oracle::recursive_diluted_event(leaves, levels, static_cast<State>(s), l));
          }
        }
      }
    }
  }
}

TEST_CASE("diluted estimator law") {
  Rng rng = make_rng(13);
  // Every state qualifies: uniform output.
  CHECK(chi_square_fit(estimator_counts({0, 0, 1, 1}, 2, 2, 2, 20000, rng), {0.5, 0.5}) > 0.001);
  // q = 2 with only one qualifying state: always that state.
  const auto forced = estimator_counts({1, 1, 1, 1}, 2, 1, 2, 2000, rng);
  CHECK(forced[1] == 2000);
  // No qualifying state: uniform output.
  CHECK(chi_square_fit(estimator_counts({0, 0, 1, 2}, 2, 1, 3, 30000, rng), {1.0 / 3, 1.0 / 3, 1.0 / 3}) > 0.001);
  // Single observed leaf.
  CHECK(diluted_root_estimator(std::vector<State>{4}, 0, 1, 5, rng) == 4);
}

TEST_CASE("majority estimator") {
  Rng rng = make_rng(14);
  CHECK(majority_root_estimator(std::vector<State>{3, 3, 3, 3}, 4, rng) == 3);
  CHECK(majority_root_estimator(std::vector<State>{1, 1, 2}, 4, rng) == 1);
  std::vector<std::size_t> counts(3, 0);
  for (int t = 0; t < 4000; ++t) ++counts[majority_root_estimator(std::vector<State>{0, 2}, 3, rng)];
  CHECK(counts[1] == 0);
  CHECK(chi_square_fit({counts[0], counts[2]}, {0.5, 0.5}) > 0.001);
}

TEST_CASE("root posterior against enumeration") {
  Rng rng = make_rng(15);
  for (int t = 0; t < 20; ++t) {
    const int q = 2 + t % 3;
    const RateModel m = t % 2 ? oracle::random_gtr(q, rng) : RateModel::potts(q);
    const Phylogeny phy = random_homogeneous_phylogeny(1 + t % 3, 0.05, 1.0, rng);
    std::uniform_int_distribution<int> state(0, q - 1);
    std::vector<State> leaves(phy.leaf_count());
    for (auto& s : leaves) s = static_cast<State>(state(rng));
    const Vector fast = exact_root_posterior(phy, m, leaves);
    const Vector slow = oracle::enumerate_root_posterior(phy, m, leaves);
    CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fast.sum() == doctest::Approx(1.0));
  }
  const Vector point = exact_root_posterior(Phylogeny::uniform(0, 0.0), RateModel::potts(3), std::vector<State>{2});
  CHECK(point(2) == doctest::Approx(1.0));
  const RateModel m = oracle::random_gtr(3, rng);
  const Vector far = exact_root_posterior(Phylogeny::uniform(2, 40.0), m, std::vector<State>{0, 1, 2, 0});
  CHECK((far - m.pi()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("error channel") {
  Rng rng = make_rng(16);
  const auto root = estimate_error_channel(Phylogeny::uniform(0, 0.0), 4, 1, 2000, rng);
  CHECK(root.mean_diagonal == doctest::Approx(1.0));
  CHECK(root.b_hat == doctest::Approx(0.0));
  const auto tiny = estimate_error_channel(Phylogeny::uniform(3, 1e-6), 2, 1, 2000, rng);
  CHECK(tiny.mean_diagonal > 0.99);
  CHECK(tiny.b_hat < 0.02);
  CHECK(tiny.matrix.rowwise().sum().maxCoeff() == doctest::Approx(1.0));
  // With q > 2 only the root state qualifies, and a rejected draw lands on
  // it with chance 1/(q-1): the diagonal is 2/q.
  const auto four = estimate_error_channel(Phylogeny::uniform(3, 1e-6), 4, 1, 8000, rng);
  CHECK(four.mean_diagonal == doctest::Approx(0.5).epsilon(0.05));

  for (double b : {0.1, 0.5, 2.0}) {
    const double diagonal = 1.0 - 3.0 * delta_from_tau(4, b);
    CHECK(potts_length_from_diagonal(4, diagonal) == doctest::Approx(b));
  }
  CHECK(std::isinf(potts_length_from_diagonal(4, 0.25)));
}

TEST_CASE("dilution calibration") {
  Rng a = make_rng(17), b = make_rng(17);
  const DilutionCalibration c = calibrate_dilution(2, 0.2, 4, a, 4000);
  CHECK(c.l >= 1);
  CHECK(c.l <= 3);
  CHECK(c.table.size() >= 1);
  CHECK(calibrate_dilution(2, 0.2, 4, b, 4000).l == c.l);
  Rng rng = make_rng(18);
  // Deeper binary trees: l = 1 never fires and larger steps let the wrong
  // state through as often as the right one.
  try {
    calibrate_dilution(2, 0.2, 8, rng, 2000);
    FAIL("calibration passed at depth 8");
  } catch (const CalibrationFailure& e) {
    CHECK(e.table().size() == 8);
  }
  CHECK_THROWS_AS(calibrate_dilution(2, std::log(2.0), 6, rng), InvalidParameter);
}

TEST_CASE("internal sequences") {
  Rng rng = make_rng(19);
  Alignment leaves(2, 200, {"1", "2", "3", "4"});
  std::bernoulli_distribution coin(0.5);
  for (std::size_t s = 0; s < 200; ++s) {
    const State x = coin(rng);
    leaves.row(0)[s] = x;
    leaves.row(1)[s] = x;
    leaves.row(2)[s] = x;
    leaves.row(3)[s] = coin(rng);
  }
  const Alignment pair = reconstruct_internal_sequences(leaves, {{0, 1}}, RootEstimator::kDiluted, 1, rng);
  for (std::size_t s = 0; s < 200; ++s) CHECK(pair.at(0, s) == leaves.at(0, s));
  const Alignment maj = reconstruct_internal_sequences(leaves, {{0, 1, 2, 3}}, RootEstimator::kMajority, 1, rng);
  for (std::size_t s = 0; s < 200; ++s) CHECK(maj.at(0, s) == leaves.at(0, s));
  CHECK_THROWS_AS(reconstruct_internal_sequences(leaves, {{0, 1, 2}}, RootEstimator::kMajority, 1, rng),
                  InvalidParameter);

  Rng x = make_rng(20), y = make_rng(20);
  CHECK(reconstruct_internal_sequences(leaves, {{0, 3}, {1, 2}}, RootEstimator::kDiluted, 1, x) ==
        reconstruct_internal_sequences(leaves, {{0, 3}, {1, 2}}, RootEstimator::kDiluted, 1, y));
}

TEST_CASE("estimator names") {
  for (auto e : {RootEstimator::kDiluted, RootEstimator::kMajority, RootEstimator::kPosterior}) {
    CHECK(parse_root_estimator(to_string(e)) == e);
  }
  CHECK_THROWS_AS(parse_root_estimator("median"), InvalidParameter);
}
