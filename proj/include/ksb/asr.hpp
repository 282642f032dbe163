#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ksb/model.hpp"
#include "ksb/rng.hpp"
#include "ksb/simulate.hpp"
#include "ksb/tree.hpp"

namespace ksb {

// Leaf states passed to the diluted and majority estimators are in subtree
// position order (left to right), 2^levels of them.

// True when an l-diluted binary subtree hanging from the root has `state` at
// all its leaves. When levels is not a multiple of l the last partial block is
// padded with zero-length levels, so a vertex there qualifies as soon as any
// leaf below it carries the state.
bool diluted_event(std::span<const State> leaves, int levels, State state, int l);

// All states for which the event holds, ascending.
std::vector<State> diluted_qualifying_states(std::span<const State> leaves, int levels, int q, int l);

// Draw X uniformly; keep it if its event holds, otherwise return a uniform
// state other than X. A single leaf (levels == 0) is returned as observed.
State diluted_root_estimator(std::span<const State> leaves, int levels, int l, int q, Rng& rng);

// Plurality over the leaves, ties broken uniformly.
State majority_root_estimator(std::span<const State> leaves, int q, Rng& rng);

// P[root = i | leaves] by pruning. Leaf states are given in label order.
Vector exact_root_posterior(const Phylogeny& phy, const RateModel& model, std::span<const State> leaves_by_label);

enum class RootEstimator { kDiluted, kMajority, kPosterior };
std::string_view to_string(RootEstimator estimator);
RootEstimator parse_root_estimator(std::string_view name);

struct ErrorChannelEstimate {
  Matrix matrix;                 // row i: law of the estimate given root state i
  double mean_diagonal = 0.0;
  double diagonal_stderr = 0.0;  // of the pooled accuracy
  double b_hat = 0.0;            // Potts channel length fitted from the mean diagonal
  double b_bar = 0.0;            // -ln(eps / (2(q-1))), diluted estimator only
  double epsilon = 0.0;          // P[event for the root state]
  double false_positive = 0.0;   // P[event for a fixed other state]
  std::size_t sample_count = 0;
  bool no_signal = false;        // mean diagonal <= 1/q
  std::vector<std::size_t> row_counts;
};

// Monte Carlo channel root -> estimate on the symmetric q-state model over
// `phy`, using random-cluster samples.
ErrorChannelEstimate estimate_error_channel(const Phylogeny& phy, int q, int l, std::size_t trials, Rng& rng,
                                            RootEstimator estimator = RootEstimator::kDiluted);

// Potts length whose diagonal equals `diagonal`; +inf when diagonal <= 1/q.
double potts_length_from_diagonal(int q, double diagonal);

struct CalibrationRow {
  int l = 0;
  double epsilon = 0.0;
  double false_positive = 0.0;
  double stderr_epsilon = 0.0;
  bool accepted = false;
};

struct DilutionCalibration {
  int l = 0;
  double epsilon = 0.0;
  int depth = 0;
  std::vector<CalibrationRow> table;
};

class CalibrationFailure : public Error {
 public:
  CalibrationFailure(const std::string& what, std::vector<CalibrationRow> table)
      : Error(what), table_(std::move(table)) {}
  const std::vector<CalibrationRow>& table() const { return table_; }

 private:
  std::vector<CalibrationRow> table_;
};

// Smallest l in 1..max_levels such that, on trees of depth max_levels with
// every edge of length g, eps >= 2 * false_positive and eps > 3 standard errors.
DilutionCalibration calibrate_dilution(int q, double g, int max_levels, Rng& rng, std::size_t trials = 10000);

}  // namespace ksb
