#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ksb/asr.hpp"
#include "ksb/metric.hpp"
#include "ksb/rng.hpp"
#include "ksb/simulate.hpp"
#include "ksb/tree.hpp"

namespace ksb {

// Pair relation counts gathered from accepted quartet splits.
struct CandidateEntry {
  int u = 0;
  int v = 0;
  int together = 0;   // accepted splits with u and v on the same side
  int separated = 0;  // accepted splits with u and v on opposite sides
};

class MatchingFailure : public Error {
 public:
  MatchingFailure(const std::string& what, std::vector<CandidateEntry> table)
      : Error(what), table_(std::move(table)) {}
  const std::vector<CandidateEntry>& table() const { return table_; }

 private:
  std::vector<CandidateEntry> table_;
};

class ReconstructionFailure : public MatchingFailure {
 public:
  ReconstructionFailure(int level, const MatchingFailure& cause, std::vector<std::vector<int>> vertex_leaves,
                        std::vector<double> distances)
      : MatchingFailure("level " + std::to_string(level) + ": " + cause.what(), cause.table()),
        level_(level),
        vertex_leaves_(std::move(vertex_leaves)),
        distances_(std::move(distances)) {}
  int level() const { return level_; }
  // Descendant leaf labels of each vertex at the failing level.
  const std::vector<std::vector<int>>& vertex_leaves() const { return vertex_leaves_; }
  // Row-major distance matrix used at the failing level.
  const std::vector<double>& distances() const { return distances_; }

 private:
  int level_;
  std::vector<std::vector<int>> vertex_leaves_;
  std::vector<double> distances_;
};

// Together/separated counts over vertices 0..m-1.
class SplitRelations {
 public:
  explicit SplitRelations(int vertex_count);
  void add(const QuartetSplit& split);
  void add(int a, int b, int c, int d);  // accepted split ab|cd
  int vertex_count() const { return m_; }
  int together(int u, int v) const { return together_[index(u, v)]; }
  int separated(int u, int v) const { return separated_[index(u, v)]; }
  // Pairs with a nonzero count, u < v.
  std::vector<CandidateEntry> table() const;

 private:
  std::size_t index(int u, int v) const { return static_cast<std::size_t>(u) * m_ + v; }
  int m_;
  std::vector<int> together_;
  std::vector<int> separated_;
};

// Pairs never separated but together at least once. Every vertex must have
// exactly one such partner; otherwise MatchingFailure with the pair table.
// Two vertices are paired without evidence.
std::vector<std::pair<int, int>> identify_cherries(const SplitRelations& relations);
std::vector<std::pair<int, int>> identify_cherries(const std::vector<QuartetSplit>& splits, int vertex_count);

// Distance between two reconstructed vertices given their descendant leaf
// labels. Used to inject exact metrics in place of sequence estimates.
using DistanceHook = std::function<double(std::span<const int>, std::span<const int>)>;

struct ReconstructParams {
  int l = 1;
  RootEstimator estimator = RootEstimator::kMajority;  // diluted or majority
  // Gate parameter D per level (one value applies to every level).
  std::vector<double> D{1.0};
  double W = 6.0;
  double f_min = 0.1;
  DistanceHook distance_hook;  // bypasses sequence estimates when set
};

struct LevelReport {
  int level = 0;
  int vertices = 0;
  double D = 0.0;
  std::size_t quartets_tested = 0;
  std::size_t splits_accepted = 0;
};

struct ReconstructionResult {
  Topology topology;
  std::vector<LevelReport> levels;
};

// Bottom-up cherry picking over a homogeneous tree with 2^h leaves; the
// alignment rows must be labeled 1..n. Throws ReconstructionFailure.
ReconstructionResult reconstruct_homogeneous(const Alignment& aln, const ReconstructParams& params, Rng& rng);

// Per site, the chosen root estimator over each group of leaf rows (listed in
// subtree order). Rows are labeled "u<index>".
Alignment reconstruct_internal_sequences(const Alignment& leaves, const std::vector<std::vector<int>>& groups,
                                         RootEstimator estimator, int l, Rng& rng);

// Estimator used for internal sequences: majority below ln sqrt 2 and at or
// beyond ln 2, the diluted estimator in between.
RootEstimator choose_estimator(double g);

// Diameter gate for each level h' = 0..h-1. Vertex distances there fall in
// classes 2jg + 2b, b being the Potts length of the estimator channel on a
// height-h' subtree (0 at the leaves, Monte Carlo with `trials` draws). The
// gate sits between the cousin class (4g + 2b) and the next one (6f + 2b),
// with the margin to the cousin class 1.75 times wider in standard errors.
std::vector<double> default_gate_schedule(int q, double f, double g, int levels, std::size_t sites,
                                          RootEstimator estimator, int l, std::size_t trials, Rng& rng);

// Parameters for trees whose branch lengths lie in [f, g] and alignments of
// `sites` columns: estimator from choose_estimator unless given, dilution step
// calibrated unless l > 0, then the gate schedule for both.
ReconstructParams default_params(int q, double f, double g, int levels, std::size_t sites, Rng& rng,
                                 std::size_t trials = 40000, std::optional<RootEstimator> estimator = {},
                                 int l = 0);

}  // namespace ksb
