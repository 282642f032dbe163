#include <cmath>
#include <sstream>

#include <doctest.h>

#include "ksb/model.hpp"
#include "ksb/oracles.hpp"

using namespace ksb;

namespace {

double max_abs(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("potts rate matrix entries") {
  const RateModel two = RateModel::potts(2);
  CHECK(two.rate()(0, 0) == doctest::Approx(-0.5));
  CHECK(two.rate()(0, 1) == doctest::Approx(0.5));
  const RateModel four = RateModel::potts(4);
  for (int i = 0; i < 4; ++i) {
    CHECK(four.pi()(i) == doctest::Approx(0.25));
    for (int j = 0; j < 4; ++j) CHECK(four.rate()(i, j) == doctest::Approx(i == j ? -0.75 : 0.25));
  }
  for (int q : {2, 3, 5, 16, 64}) {
    const RateModel m = RateModel::potts(q);
    CHECK(m.lambda2() == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(m.is_symmetric());
  }
}

TEST_CASE("transition matrix special values") {
  const RateModel m = RateModel::potts(2);
  CHECK(max_abs(transition_matrix(m, 0.0), Matrix::Identity(2, 2)) < 1e-14);
  Matrix expected(2, 2);
  expected << 0.75, 0.25, 0.25, 0.75;
  CHECK(max_abs(transition_matrix(m, std::log(2.0)), expected) < 1e-12);
  CHECK(max_abs(potts_transition(2, std::log(2.0)), expected) < 1e-12);
  const RateModel four = RateModel::potts(4);
  CHECK(max_abs(transition_matrix(four, 0.5), oracle::series_expm(four.rate() * 0.5)) < 1e-10);
}

TEST_CASE("delta formula") {
  CHECK(delta_from_tau(3, 0.0) == 0.0);
  CHECK(delta_from_tau(2, std::log(2.0)) == doctest::Approx(0.25));
  CHECK(delta_from_tau(5, 20.0) < 0.2);
  CHECK(delta_from_tau(5, 20.0) == doctest::Approx(0.2));
  double previous = -1.0;
  for (double tau = 0.0; tau < 5.0; tau += 0.1) {
    const double d = delta_from_tau(4, tau);
    CHECK(d > previous);
    previous = d;
  }
}

TEST_CASE("closed form against the exponential on the stated grid") {
  for (int q : {2, 3, 4, 16, 64}) {
    const RateModel m = RateModel::potts(q);
    for (double tau : {0.05, 0.3465, 0.5, 0.6931, 2.0}) {
      CHECK(max_abs(potts_transition(q, tau), oracle::series_expm(m.rate() * tau)) < 1e-10);
      CHECK(max_abs(potts_transition(q, tau), m.transition(tau)) < 1e-10);
    }
  }
}

TEST_CASE("semigroup, stationarity and stochastic rows for random reversible models") {
  Rng rng = make_rng(11);
  std::uniform_real_distribution<double> length(0.0, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    const RateModel m = oracle::random_gtr(2 + trial % 4, rng);
    const double a = length(rng), b = length(rng);
    const Matrix ma = transition_matrix(m, a);
    CHECK(max_abs(ma * transition_matrix(m, b), transition_matrix(m, a + b)) < 1e-9);
    CHECK((m.pi().transpose() * ma - m.pi().transpose()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((ma.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(ma.minCoeff() >= -1e-15);
    CHECK(m.lambda2() == doctest::Approx(-1.0).epsilon(1e-9));
  }
}

TEST_CASE("thresholds") {
  const Thresholds t = thresholds(RateModel::potts(4));
  CHECK(t.g_lin == doctest::Approx(0.346574).epsilon(1e-6));
  CHECK(t.g_perc == doctest::Approx(0.693147).epsilon(1e-6));
  // Jukes-Cantor under the rate-one convention.
  CHECK(t.g_lin_bio == doctest::Approx(3.0 / 8.0 * std::log(2.0)));
}

TEST_CASE("validate_gtr diagnostics and rescaling") {
  const RateModel p = RateModel::potts(3);
  const auto same = validate_gtr(p.rate(), p.pi());
  CHECK(same.scale == doctest::Approx(1.0));
  const auto doubled = validate_gtr(p.rate() * 2.0, p.pi());
  CHECK(doubled.scale == doctest::Approx(0.5));
  CHECK(doubled.model.lambda2() == doctest::Approx(-1.0));

  Matrix negative = p.rate();
  negative(0, 1) = -negative(0, 1);
  negative(0, 0) = -(negative(0, 1) + negative(0, 2));
  try {
    validate_gtr(negative, p.pi());
    FAIL("accepted a negative rate");
  } catch (const ModelError& e) {
    CHECK(e.diagnostic() == ModelDiagnostic::kNegativeRate);
  }

  Matrix rows = p.rate();
  rows(1, 1) += 0.1;
  CHECK_THROWS_AS(validate_gtr(rows, p.pi()), ModelError);

  Vector pi(3);
  pi << 0.5, 0.3, 0.2;
  try {
    validate_gtr(p.rate(), pi);
    FAIL("accepted a non-reversible pair");
  } catch (const ModelError& e) {
    CHECK(e.diagnostic() == ModelDiagnostic::kNonReversible);
  }
  Vector bad_pi(3);
  bad_pi << 0.5, 0.5, 0.5;
  try {
    validate_gtr(p.rate(), bad_pi);
    FAIL("accepted an invalid stationary law");
  } catch (const ModelError& e) {
    CHECK(e.diagnostic() == ModelDiagnostic::kInvalidStationary);
  }
}

TEST_CASE("rate model file") {
  std::istringstream in("# jc\n2\n-1 1\n1 -1\n0.5 0.5\n");
  const RateModel m = read_rate_model(in);
  CHECK(m.q() == 2);
  CHECK(m.rate()(0, 1) == doctest::Approx(0.5));
}
