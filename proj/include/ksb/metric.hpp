#pragma once

#include <array>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ksb/model.hpp"
#include "ksb/rng.hpp"
#include "ksb/simulate.hpp"
#include "ksb/tree.hpp"

namespace ksb {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// -ln(1 - q/(q-1) * fraction of disagreeing sites); +inf once the log
// argument is <= 0.
double estimate_distance(std::span<const State> u, std::span<const State> v, int q);
double distance_from_disagreements(std::size_t disagreements, std::size_t sites, int q);

// Delta-method standard error of the estimate at true distance tau.
double distance_stderr(double tau, int q, std::size_t sites);

// Pairwise distance estimates with a diameter gate at D + ln(W/4).
class DistortedMetric {
 public:
  DistortedMetric(std::vector<std::string> labels, std::vector<double> values, double D, double W);

  // All pairwise estimates between the rows of an alignment.
  static DistortedMetric from_alignment(const Alignment& aln, double D, double W);

  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  double operator()(int u, int v) const { return values_[static_cast<std::size_t>(u) * labels_.size() + v]; }
  double D() const { return D_; }
  double W() const { return W_; }
  double gate() const { return gate_; }

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
  double D_;
  double W_;
  double gate_;
};

// Pairings of four vertices (a, b, c, d).
enum class Pairing { kAbCd, kAcBd, kAdBc, kUndetermined };
std::string_view to_string(Pairing p);

struct QuartetSplit {
  std::array<int, 4> vertices;
  Pairing pairing;
  // The two sides, e.g. {{a, b}, {c, d}} for kAbCd.
  std::array<std::array<int, 2>, 2> sides() const;
};

// Four-point value 1/2[d(a,c) + d(b,d) - d(a,b) - d(c,d)] for any callable
// distance, without gating.
template <class Dist>
double four_point(const Dist& d, int a, int b, int c, int dd) {
  return 0.5 * (d(a, c) + d(b, dd) - d(a, b) - d(c, dd));
}

// Largest pairwise estimate within the quartet.
double quartet_diameter(const DistortedMetric& m, int a, int b, int c, int d);

// Gated four-point value: +inf when the quartet diameter exceeds the gate.
double four_point_value(const DistortedMetric& m, int a, int b, int c, int d);

// Sign rule: ab|cd if F(ab|cd) > 0, ac|bd if < 0, ad|bc otherwise.
// Undetermined when gated or when any estimate is infinite.
QuartetSplit four_point_split(const DistortedMetric& m, int a, int b, int c, int d);

// Indicators 1{F(xy|zw) > f/2} for the pairings ab|cd, ac|bd, ad|bc.
// Gated quartets give all zeros.
std::array<bool, 3> fp_indicator(const DistortedMetric& m, int a, int b, int c, int d, double f_min);

// Splits ab|cd, ac|bd, ad|bc accepted under every labeling of their sides,
// e.g. ab|cd needs both fp(a,b|c,d) and fp(b,a|c,d). Gated quartets give all
// zeros.
std::array<bool, 3> split_indicator(const DistortedMetric& m, int a, int b, int c, int d, double f_min);

// Header row of labels, then the full matrix; +inf written as `inf`.
void write_distance_tsv(std::ostream& out, const DistortedMetric& m);

struct ConcentrationReport {
  std::size_t trials = 0;
  std::size_t sites = 0;
  double c_prime = 0.0;   // sites / ln n
  double target = 0.0;    // 1 - 1/n
  // Pairs with true distance < D: |estimate - truth| < delta.
  std::size_t short_pairs = 0;
  double short_rate = 1.0;
  // Pairs with true distance > D + ln W: estimate > D + ln(W/2).
  std::size_t large_pairs = 0;
  double large_rate = 1.0;
  // Pairs with true distance < D + ln(W/5): estimate <= D + ln(W/4).
  std::size_t small_pairs = 0;
  double small_rate = 1.0;
  // Both diameter classes against the gate D + ln(W/4) itself.
  double gate_rate = 1.0;
  // Fraction of trials in which every short pair, respectively every pair of
  // both diameter classes, came out right.
  double short_trial_rate = 1.0;
  double gate_trial_rate = 1.0;
  // Lowest per-pair fraction of trials classified right by the gate.
  double gate_worst_pair_rate = 1.0;
  bool passed = false;
};

// Monte Carlo check of the short-distance and diameter-test behaviour of
// leaf-pair estimates on `phy`.
ConcentrationReport distance_concentration_check(const Phylogeny& phy, const RateModel& model, std::size_t sites,
                                                 double D, double delta, double W, std::size_t trials, Rng& rng);

}  // namespace ksb
