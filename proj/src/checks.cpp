#include "ksb/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "ksb/asr.hpp"
#include "ksb/experiments.hpp"
#include "ksb/metric.hpp"
#include "ksb/model.hpp"
#include "ksb/oracles.hpp"
#include "ksb/reconstruct.hpp"
#include "ksb/simulate.hpp"

namespace ksb {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, x);
  return buf;
}

// Times `body`, which fills in passed and detail; the time limit is added to
// the verdict at full scale.
template <class Body>
CheckResult timed(int id, std::string name, double limit, CheckScale scale, Body body) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  r.time_limit = limit;
  const auto start = Clock::now();
  body(r);
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (scale == CheckScale::kFull && r.seconds >= limit) {
    r.passed = false;
    r.detail += "; over the " + fmt("%.0f", limit) + " s limit";
  }
  return r;
}

std::vector<std::size_t> pattern_counts(const Alignment& leaves) {
  const Alignment rows = leaves.leaves_only();
  const int n = static_cast<int>(rows.rows());
  std::size_t patterns = 1;
  for (int a = 0; a < n; ++a) patterns *= rows.q();
  std::vector<std::size_t> counts(patterns, 0);
  std::vector<State> column(n);
  for (std::size_t site = 0; site < rows.sites(); ++site) {
    for (int a = 0; a < n; ++a) column[a] = rows.at(a, site);
    ++counts[leaf_pattern_index(column, rows.q())];
  }
  return counts;
}

// Node at the root of the smallest subtree holding all the given leaves.
int common_ancestor(const Phylogeny& phy, std::span<const int> labels) {
  int lo = phy.node_count(), hi = -1;
  for (int label : labels) {
    const int node = phy.leaf_node(phy.leaf_position(label));
    lo = std::min(lo, node);
    hi = std::max(hi, node);
  }
  while (lo != hi) {
    lo = Phylogeny::parent(lo);
    hi = Phylogeny::parent(hi);
  }
  return lo;
}

}  // namespace

double chi_square_pvalue(double statistic, double dof) {
  if (!(dof > 0.0)) throw InvalidParameter("chi-square needs positive degrees of freedom");
  if (!(statistic > 0.0)) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

double chi_square_fit(const std::vector<std::size_t>& counts, const std::vector<double>& probabilities) {
  if (counts.size() != probabilities.size()) throw InvalidParameter("counts and probabilities differ in size");
  double total = 0.0;
  for (std::size_t c : counts) total += static_cast<double>(c);
  if (total <= 0.0) throw InvalidParameter("no observations");
  double statistic = 0.0, pooled_observed = 0.0, pooled_expected = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = total * probabilities[i];
    if (expected < 5.0) {
      pooled_observed += static_cast<double>(counts[i]);
      pooled_expected += expected;
      continue;
    }
    const double diff = static_cast<double>(counts[i]) - expected;
    statistic += diff * diff / expected;
    ++cells;
  }
  if (pooled_expected > 0.0) {
    const double diff = pooled_observed - pooled_expected;
    statistic += diff * diff / pooled_expected;
    ++cells;
  }
  if (cells < 2) return 1.0;
  return chi_square_pvalue(statistic, cells - 1);
}

CheckResult check_closed_form_transition(CheckScale scale) {
  return timed(1, "closed-form Potts transition vs matrix exponential", 1.0, scale, [](CheckResult& r) {
    double spectral = 0.0, series = 0.0;
    for (int q : {2, 4, 16, 64}) {
      const RateModel model = RateModel::potts(q);
      for (double tau : {0.05, std::log(std::sqrt(2.0)), 0.5, std::log(2.0), 2.0}) {
        const Matrix closed = potts_transition(q, tau);
        spectral = std::max(spectral, (closed - model.transition(tau)).cwiseAbs().maxCoeff());
        series = std::max(series, (closed - oracle::series_expm(model.rate() * tau)).cwiseAbs().maxCoeff());
      }
    }
    r.passed = spectral <= 1e-10 && series <= 1e-10;
    r.detail = "max error vs spectral " + fmt("%.2e", spectral) + ", vs series " + fmt("%.2e", series) +
               " (tol 1e-10)";
  });
}

CheckResult check_sampler_equivalence(CheckScale scale, Rng& rng) {
  return timed(2, "sampler goodness of fit (h=2, q=3, tau=0.4)", 60.0, scale, [&](CheckResult& r) {
    const std::size_t samples = scale == CheckScale::kFull ? 100000 : 20000;
    const Phylogeny phy = Phylogeny::uniform(2, 0.4);
    const RateModel model = RateModel::potts(3);
    const std::vector<double> exact = exact_leaf_distribution(phy, model);
    const std::vector<double> enumerated = oracle::enumerate_leaf_distribution(phy, model);
    double law_error = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) law_error = std::max(law_error, std::abs(exact[i] - enumerated[i]));
    const double p_broadcast =
        chi_square_fit(pattern_counts(sample_alignment(phy, model, samples, rng, SamplerKind::kBroadcast).leaves), exact);
    const double p_cluster = chi_square_fit(
        pattern_counts(sample_alignment(phy, model, samples, rng, SamplerKind::kRandomCluster).leaves), exact);
    r.passed = p_broadcast > 0.01 && p_cluster > 0.01 && law_error < 1e-12;
    r.detail = "p broadcast " + fmt("%.4f", p_broadcast) + ", p random-cluster " + fmt("%.4f", p_cluster) +
               " (need > 0.01, " + std::to_string(samples) + " samples); exact law vs enumeration " +
               fmt("%.1e", law_error);
  });
}

CheckResult check_posterior_oracle(CheckScale scale, Rng& rng) {
  return timed(3, "root posterior vs exhaustive enumeration", 10.0, scale, [&](CheckResult& r) {
    const int instances = scale == CheckScale::kFull ? 100 : 20;
    std::uniform_int_distribution<int> pick_h(1, 3), pick_q(2, 3), coin(0, 1);
    std::uniform_real_distribution<double> length(0.05, 1.5);
    double worst = 0.0;
    for (int t = 0; t < instances; ++t) {
      const int h = pick_h(rng), q = pick_q(rng);
      const RateModel model = coin(rng) ? RateModel::potts(q) : oracle::random_gtr(q, rng);
      std::vector<double> lengths(static_cast<std::size_t>(2 << h) - 1);
      for (auto& x : lengths) x = length(rng);
      std::vector<int> labels(1 << h);
      std::iota(labels.begin(), labels.end(), 1);
      std::shuffle(labels.begin(), labels.end(), rng);
      const Phylogeny phy(h, lengths, labels);
      std::uniform_int_distribution<int> state(0, q - 1);
      std::vector<State> leaves(1 << h);
      for (auto& s : leaves) s = static_cast<State>(state(rng));
      const Vector fast = exact_root_posterior(phy, model, leaves);
      const Vector slow = oracle::enumerate_root_posterior(phy, model, leaves);
      worst = std::max(worst, (fast - slow).cwiseAbs().maxCoeff());
    }
    r.passed = worst <= 1e-12;
    r.detail = std::to_string(instances) + " instances, max error " + fmt("%.2e", worst) + " (tol 1e-12)";
  });
}

CheckResult check_noiseless_reconstruction(CheckScale scale, Rng& rng) {
  return timed(4, "reconstruction from exact tree metrics (f=0.1, g=0.6)", 60.0, scale, [&](CheckResult& r) {
    const int trees = scale == CheckScale::kFull ? 100 : 10;
    std::ostringstream detail;
    r.passed = true;
    for (int h : {2, 3, 4}) {
      int ok = 0;
      for (int t = 0; t < trees; ++t) {
        const Phylogeny phy = random_homogeneous_phylogeny(h, 0.1, 0.6, rng);
        const TreeMetric metric(phy);
        ReconstructParams params;
        params.D = {kInfinity};
        params.f_min = 0.1;
        params.distance_hook = [&](std::span<const int> u, std::span<const int> v) {
          return metric(common_ancestor(phy, u), common_ancestor(phy, v));
        };
        std::vector<std::string> labels;
        for (int a = 1; a <= phy.leaf_count(); ++a) labels.push_back(std::to_string(a));
        const Alignment placeholder(2, 1, labels);
        try {
          ok += topologies_equal(reconstruct_homogeneous(placeholder, params, rng).topology, unroot(phy));
        } catch (const ReconstructionFailure&) {
        }
      }
      detail << (h > 2 ? ", " : "") << "h=" << h << ": " << ok << "/" << trees;
      r.passed = r.passed && ok == trees;
    }
    r.detail = detail.str();
  });
}

CheckResult check_subcritical_reconstruction(CheckScale scale, Rng& rng) {
  return timed(5, "reconstruction below the KS bound (q=2, tau=0.2, k=4000)", 600.0, scale, [&](CheckResult& r) {
    const bool full = scale == CheckScale::kFull;
    const int h = full ? 7 : 5;
    const PtrRow row = run_ptr_cell(2, 0.2, 1.0, h, 4000, full ? 50 : 20, "auto", 0, rng);
    r.passed = row.rate >= 0.9;
    r.detail = "h=" + std::to_string(h) + ": " + std::to_string(row.successes) + "/" + std::to_string(row.trials) +
               " recovered, rate " + fmt("%.3f", row.rate) + " (need >= 0.9)";
  });
}

CheckResult check_supercritical_failure(CheckScale scale, Rng& rng) {
  return timed(6, "failure above the KS bound (q=2, tau=0.9, k=4000)", 600.0, scale, [&](CheckResult& r) {
    const bool full = scale == CheckScale::kFull;
    const int h = full ? 7 : 5;
    const PtrRow row = run_ptr_cell(2, 0.9, 1.0, h, 4000, full ? 50 : 20, "auto", 0, rng);
    std::vector<double> tv;
    for (int depth : {2, 3, 4}) {
      const auto [a, b] = quartet_swap_pair(depth, 0.9);
      tv.push_back(exact_distinguishability(a, b, RateModel::potts(2), 1, 0, rng).tv);
    }
    const bool decreasing = tv[0] > tv[1] && tv[1] > tv[2];
    r.passed = row.rate <= 0.2 && decreasing;
    r.detail = "h=" + std::to_string(h) + ": rate " + fmt("%.3f", row.rate) + " (need <= 0.2); TV at depth 2,3,4: " +
               fmt("%.5f", tv[0]) + ", " + fmt("%.5f", tv[1]) + ", " + fmt("%.5f", tv[2]) +
               (decreasing ? " (decreasing)" : " (not decreasing)");
  });
}

CheckResult check_diluted_root_accuracy(CheckScale scale, Rng& rng) {
  return timed(7, "diluted root estimator beyond the KS bound (q=64, tau=0.5)", 900.0, scale, [&](CheckResult& r) {
    const bool full = scale == CheckScale::kFull;
    const int q = 64;
    const double tau = 0.5;
    const int deepest = full ? 9 : 6;
    const std::size_t trials = full ? 10000 : 2000;
    const int l = default_dilution_step(q, tau, deepest, rng);
    std::vector<std::size_t> successes, counts;
    std::ostringstream accuracies;
    ErrorChannelEstimate channel;
    for (int h = 4; h <= deepest; ++h) {
      channel = estimate_error_channel(Phylogeny::uniform(h, tau), q, l, trials, rng, RootEstimator::kDiluted);
      successes.push_back(static_cast<std::size_t>(std::llround(channel.mean_diagonal * static_cast<double>(trials))));
      counts.push_back(trials);
      accuracies << (h > 4 ? " " : "") << fmt("%.4f", channel.mean_diagonal);
    }
    const TrendResult trend = bootstrap_trend(successes, counts, 2000, 0.95, rng);

    // Off-diagonal mass of the deepest channel pooled by offset (estimate -
    // root mod q); a Potts-form channel spreads it evenly.
    std::vector<double> offsets(q, 0.0);
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < q; ++j) {
        if (i != j) offsets[(j - i + q) % q] += channel.matrix(i, j) * static_cast<double>(channel.row_counts[i]);
      }
    }
    double off_total = 0.0;
    for (int d = 1; d < q; ++d) off_total += offsets[d];
    double statistic = 0.0;
    const double expected = off_total / (q - 1);
    for (int d = 1; d < q; ++d) statistic += (offsets[d] - expected) * (offsets[d] - expected) / expected;
    const double p_equal = chi_square_pvalue(statistic, q - 2);
    const double diagonal_margin = (channel.mean_diagonal - 1.0 / q) / channel.diagonal_stderr;

    r.passed = !trend.decay && p_equal > 0.0027 && diagonal_margin > 3.0;
    r.detail = "l=" + std::to_string(l) + ", accuracy h=4.." + std::to_string(deepest) + ": " + accuracies.str() +
               " (1/q=" + fmt("%.4f", 1.0 / q) + "); decreasing in " + fmt("%.1f", 100 * trend.fraction_decreasing) +
               "% of bootstrap replicates (decay if >= 95%); off-diagonal equality p=" + fmt("%.4f", p_equal) +
               " (need > 0.0027); diagonal " + fmt("%.1f", diagonal_margin) + " SE above 1/q (need > 3)";
  });
}

CheckResult check_channel_composition(CheckScale scale, Rng& rng) {
  return timed(8, "channel composition exp(b1 Q) exp(b2 Q) = exp((b1+b2) Q)", 1.0, scale, [&](CheckResult& r) {
    std::uniform_int_distribution<int> pick_q(2, 64);
    std::uniform_real_distribution<double> length(0.0, 3.0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const int q = pick_q(rng);
      const double b1 = length(rng), b2 = length(rng);
      const RateModel model = t % 2 == 0 ? RateModel::potts(q) : oracle::random_gtr(2 + q % 7, rng);
      const Matrix lhs = model.transition(b1) * model.transition(b2);
      worst = std::max(worst, (lhs - model.transition(b1 + b2)).cwiseAbs().maxCoeff());
    }
    r.passed = worst <= 1e-10;
    r.detail = "100 triples, max error " + fmt("%.2e", worst) + " (tol 1e-10)";
  });
}

CheckResult check_distance_concentration(CheckScale scale, Rng& rng) {
  return timed(9, "distance concentration and diameter gate (q=2, k=4000)", 120.0, scale, [&](CheckResult& r) {
    // Both scales: fewer trials cannot resolve the 99% threshold.
    const std::size_t trials = 200;
    const RateModel model = RateModel::potts(2);
    // One pair at distance 0.4.
    const ConcentrationReport pair =
        distance_concentration_check(Phylogeny::uniform(1, 0.2), model, 4000, 1.0, 0.05, 20.0, trials, rng);
    // Every leaf pair of a 64-leaf tree against the gate D + ln(W/4).
    const ConcentrationReport gate =
        distance_concentration_check(Phylogeny::uniform(6, 0.4), model, 4000, 1.0, 0.05, 20.0, trials, rng);
    r.passed = pair.short_trial_rate >= 0.99 && gate.gate_worst_pair_rate >= 0.99;
    r.detail = "|est - 0.4| < 0.05 in " + fmt("%.1f", 100 * pair.short_trial_rate) +
               "% of trials; gate (D=1, W=20) right for every pair in >= " +
               fmt("%.1f", 100 * gate.gate_worst_pair_rate) + "% of trials (need >= 99%, " + std::to_string(trials) +
               " trials; all pairs at once in " + fmt("%.1f", 100 * gate.gate_trial_rate) + "%)";
  });
}

std::vector<CheckResult> run_checks(CheckScale scale, std::uint64_t seed, const std::vector<int>& only) {
  std::vector<CheckResult> out;
  for (int id = 1; id <= 9; ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(id)));
    switch (id) {
      case 1: out.push_back(check_closed_form_transition(scale)); break;
      case 2: out.push_back(check_sampler_equivalence(scale, rng)); break;
      case 3: out.push_back(check_posterior_oracle(scale, rng)); break;
      case 4: out.push_back(check_noiseless_reconstruction(scale, rng)); break;
      case 5: out.push_back(check_subcritical_reconstruction(scale, rng)); break;
      case 6: out.push_back(check_supercritical_failure(scale, rng)); break;
      case 7: out.push_back(check_diluted_root_accuracy(scale, rng)); break;
      case 8: out.push_back(check_channel_composition(scale, rng)); break;
      case 9: out.push_back(check_distance_concentration(scale, rng)); break;
    }
  }
  return out;
}

std::string format_check(const CheckResult& r) {
  return std::string(r.passed ? "PASS" : "FAIL") + " [" + std::to_string(r.id) + "] " + r.name + ": " + r.detail +
         " (" + fmt("%.2f", r.seconds) + " s)";
}

}  // namespace ksb
