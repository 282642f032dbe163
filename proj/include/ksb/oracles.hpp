#pragma once

#include <span>
#include <vector>

#include "ksb/model.hpp"
#include "ksb/rng.hpp"
#include "ksb/simulate.hpp"
#include "ksb/tree.hpp"

namespace ksb::oracle {

// Slow reference computations, written independently of the main code paths
// and used to cross-check them.

// exp(A) by scaling and squaring of a truncated Taylor series.
Matrix series_expm(const Matrix& a);

// Random reversible rate matrix with Lambda_2 = -1.
RateModel random_gtr(int q, Rng& rng);

// Joint probability of each leaf pattern (index sum_a s_a q^(a-1) over labels)
// by summing over every assignment of every vertex. Transition matrices come
// from series_expm.
std::vector<double> enumerate_leaf_distribution(const Phylogeny& phy, const RateModel& model);

// P[root = i | leaves] by summing over all internal assignments.
Vector enumerate_root_posterior(const Phylogeny& phy, const RateModel& model, std::span<const State> leaves_by_label);

// Path length between two nodes, walking up to the common ancestor.
double path_length(const Phylogeny& phy, int u, int v);

// Diluted event by recursion over tree nodes: the root qualifies if at least
// two of its descendants l levels down qualify, the deepest retained level
// qualifies if any leaf below carries the state.
bool recursive_diluted_event(std::span<const State> leaves, int levels, State state, int l);

}  // namespace ksb::oracle
