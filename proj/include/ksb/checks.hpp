#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ksb/rng.hpp"

namespace ksb {

// Regime and oracle checks shared by `ksb verify` and the acceptance suite.
// The full scale uses the sizes and tolerances of the acceptance criteria;
// the quick scale shrinks sample sizes for an interactive run.
enum class CheckScale { kQuick, kFull };

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double time_limit = 0.0;  // seconds; part of the verdict at full scale
};

CheckResult check_closed_form_transition(CheckScale scale);
CheckResult check_sampler_equivalence(CheckScale scale, Rng& rng);
CheckResult check_posterior_oracle(CheckScale scale, Rng& rng);
CheckResult check_noiseless_reconstruction(CheckScale scale, Rng& rng);
CheckResult check_subcritical_reconstruction(CheckScale scale, Rng& rng);
CheckResult check_supercritical_failure(CheckScale scale, Rng& rng);
CheckResult check_diluted_root_accuracy(CheckScale scale, Rng& rng);
CheckResult check_channel_composition(CheckScale scale, Rng& rng);
CheckResult check_distance_concentration(CheckScale scale, Rng& rng);

// Check i (1..9) draws from derive_seed(seed, i).
std::vector<CheckResult> run_checks(CheckScale scale, std::uint64_t seed, const std::vector<int>& only = {});

// `PASS [3] name: detail (1.23 s)`
std::string format_check(const CheckResult& r);

// Upper tail of the chi-square law.
double chi_square_pvalue(double statistic, double dof);

// Pearson goodness of fit of counts against probabilities; cells with
// expected count below 5 are pooled into one. Returns the p-value.
double chi_square_fit(const std::vector<std::size_t>& counts, const std::vector<double>& probabilities);

}  // namespace ksb
