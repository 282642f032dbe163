#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ksb/model.hpp"
#include "ksb/rng.hpp"
#include "ksb/tree.hpp"

namespace ksb {

// Character state, 0-based in memory (written as 1..q in files).
using State = std::uint8_t;
inline constexpr int kMaxStates = 256;

// k sites at a set of labeled nodes, one row per node.
class Alignment {
 public:
  Alignment() = default;
  Alignment(int q, std::size_t sites, std::vector<std::string> labels);

  int q() const { return q_; }
  std::size_t sites() const { return sites_; }
  std::size_t rows() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t row) const { return labels_[row]; }

  std::span<State> row(std::size_t r) { return {data_.data() + r * sites_, sites_}; }
  std::span<const State> row(std::size_t r) const { return {data_.data() + r * sites_, sites_}; }
  State at(std::size_t r, std::size_t site) const { return data_[r * sites_ + site]; }

  // Rows whose label is a positive integer, reordered so row i has label i+1.
  // Throws InvalidParameter unless those labels are exactly 1..n.
  Alignment leaves_only() const;

  bool operator==(const Alignment& other) const = default;

 private:
  int q_ = 0;
  std::size_t sites_ = 0;
  std::vector<std::string> labels_;
  std::vector<State> data_;
};

// Exact draws from the Markov model on a tree; per-edge transition rows are
// cached at construction.
class BroadcastSampler {
 public:
  BroadcastSampler(const Phylogeny& phy, const RateModel& model);
  // States at every node, level order.
  void sample(Rng& rng, std::span<State> states) const;
  std::vector<State> sample(Rng& rng) const;

 private:
  int q_;
  int nodes_;
  std::vector<double> root_cdf_;
  std::vector<int> matrix_of_node_;
  std::vector<std::vector<double>> cdfs_;  // q*q cumulative rows
};

// Random-cluster draws for the symmetric model: each edge is open with
// probability e^{-tau}, and every open cluster gets a uniform state.
class ClusterSampler {
 public:
  ClusterSampler(const Phylogeny& phy, int q);
  void sample(Rng& rng, std::span<State> states) const;
  std::vector<State> sample(Rng& rng) const;

 private:
  int q_;
  int nodes_;
  std::vector<double> open_probability_;
};

std::vector<State> broadcast_sample(const Phylogeny& phy, const RateModel& model, Rng& rng);

// Throws UnsupportedModel unless the model is symmetric.
std::vector<State> random_cluster_sample(const Phylogeny& phy, const RateModel& model, Rng& rng);
std::vector<State> random_cluster_sample(const Phylogeny& phy, int q, Rng& rng);

enum class SamplerKind { kBroadcast, kRandomCluster };

struct SampledData {
  Alignment leaves;                 // rows labeled "1".."n"
  std::optional<Alignment> hidden;  // internal nodes, rows labeled "i<node>"
};

SampledData sample_alignment(const Phylogeny& phy, const RateModel& model, std::size_t sites, Rng& rng,
                             SamplerKind sampler = SamplerKind::kBroadcast, bool keep_internal = false);

// Joint law of the leaf states. Entry index is sum_a s_a q^{a-1} over labels a.
inline constexpr double kMaxExactOutcomes = 1e6;
std::vector<double> exact_leaf_distribution(const Phylogeny& phy, const RateModel& model);

// Index of a leaf configuration given in label order.
std::size_t leaf_pattern_index(std::span<const State> by_label, int q);

// Header `q=<q> k=<k>`, then `<label>\t<s1> <s2> ...` with states 1..q.
// Leading '#' lines are comments.
void write_alignment(std::ostream& out, const Alignment& aln);
Alignment read_alignment(std::istream& in);

}  // namespace ksb
