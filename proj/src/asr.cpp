#include "ksb/asr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ksb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_leaves(std::span<const State> leaves, int levels) {
  if (levels < 0 || levels > 24) throw InvalidParameter("levels must be in [0, 24]");
  if (leaves.size() != (std::size_t{1} << levels)) {
    throw InvalidParameter("expected 2^levels leaf states");
  }
}

// Qualification flags of the vertices at the deepest diluted level.
void deepest_level(std::span<const State> leaves, int levels, State state, int l, std::vector<char>& flags) {
  const int top = (levels / l) * l;
  const std::size_t block = std::size_t{1} << (levels - top);
  flags.assign(std::size_t{1} << top, 0);
  for (std::size_t p = 0; p < flags.size(); ++p) {
    const auto first = leaves.begin() + static_cast<std::ptrdiff_t>(p * block);
    flags[p] = std::find(first, first + static_cast<std::ptrdiff_t>(block), state) != first + block;
  }
}

bool event_with_scratch(std::span<const State> leaves, int levels, State state, int l, std::vector<char>& flags) {
  deepest_level(leaves, levels, state, l, flags);
  const std::size_t width = std::size_t{1} << std::min(l, 24);
  std::size_t size = flags.size();
  while (size > 1) {
    const std::size_t parents = size / width;
    for (std::size_t p = 0; p < parents; ++p) {
      int count = 0;
      for (std::size_t c = p * width; c < (p + 1) * width && count < 2; ++c) count += flags[c];
      flags[p] = count >= 2;
    }
    size = parents;
  }
  return flags[0] != 0;
}

State other_state(State x, int q, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, q - 2);
  int y = pick(rng);
  if (y >= x) ++y;
  return static_cast<State>(y);
}

// Posterior with per-node normalization; `apply(v, vec)` multiplies by the
// transition matrix of the edge above v.
template <class Apply>
Vector prune(const Phylogeny& phy, int q, std::span<const State> leaves_by_label, const Vector& prior,
             Apply apply) {
  const int n = phy.leaf_count();
  if (leaves_by_label.size() != static_cast<std::size_t>(n)) {
    throw InvalidParameter("expected one state per leaf label");
  }
  const int nodes = phy.node_count();
  std::vector<Vector> up(nodes);
  for (int v = nodes - 1; v >= 0; --v) {
    Vector partial;
    if (phy.is_leaf(v)) {
      const State s = leaves_by_label[phy.leaf_label(v - (n - 1)) - 1];
      if (s >= q) throw InvalidParameter("leaf state out of range");
      partial = Vector::Zero(q);
      partial(s) = 1.0;
    } else {
      partial = up[Phylogeny::left(v)].cwiseProduct(up[Phylogeny::right(v)]);
      up[Phylogeny::left(v)].resize(0);
      up[Phylogeny::right(v)].resize(0);
      const double total = partial.sum();
      if (!(total > 0.0)) throw NumericError("leaf configuration has zero likelihood");
      partial /= total;
    }
    up[v] = v == 0 ? partial : apply(v, partial);
  }
  Vector post = prior.cwiseProduct(up[0]);
  const double z = post.sum();
  if (!(z > 0.0)) throw NumericError("leaf configuration has zero likelihood");
  return post / z;
}

Vector potts_posterior(const Phylogeny& phy, int q, std::span<const State> leaves_by_label) {
  return prune(phy, q, leaves_by_label, Vector::Constant(q, 1.0 / q), [&](int v, const Vector& x) -> Vector {
    const double keep = std::exp(-phy.edge_length(v));
    return ((keep * x).array() + (1.0 - keep) * x.mean()).matrix();
  });
}

}  // namespace

bool diluted_event(std::span<const State> leaves, int levels, State state, int l) {
  check_leaves(leaves, levels);
  if (l < 1) throw InvalidParameter("dilution step l must be >= 1");
  std::vector<char> flags;
  return event_with_scratch(leaves, levels, state, l, flags);
}

std::vector<State> diluted_qualifying_states(std::span<const State> leaves, int levels, int q, int l) {
  check_leaves(leaves, levels);
  if (l < 1) throw InvalidParameter("dilution step l must be >= 1");
  std::vector<State> out;
  std::vector<char> flags;
  for (int i = 0; i < q; ++i) {
    if (event_with_scratch(leaves, levels, static_cast<State>(i), l, flags)) out.push_back(static_cast<State>(i));
  }
  return out;
}

State diluted_root_estimator(std::span<const State> leaves, int levels, int l, int q, Rng& rng) {
  check_leaves(leaves, levels);
  if (l < 1) throw InvalidParameter("dilution step l must be >= 1");
  if (q < 2) throw InvalidParameter("q must be >= 2");
  if (levels == 0) return leaves[0];
  std::uniform_int_distribution<int> pick(0, q - 1);
  const auto x = static_cast<State>(pick(rng));
  std::vector<char> flags;
  if (event_with_scratch(leaves, levels, x, l, flags)) return x;
  return other_state(x, q, rng);
}

State majority_root_estimator(std::span<const State> leaves, int q, Rng& rng) {
  if (leaves.empty()) throw InvalidParameter("no leaf states");
  std::vector<int> counts(q, 0);
  for (State s : leaves) {
    if (s >= q) throw InvalidParameter("leaf state out of range");
    ++counts[s];
  }
  const int best = *std::max_element(counts.begin(), counts.end());
  std::vector<State> tied;
  for (int i = 0; i < q; ++i) {
    if (counts[i] == best) tied.push_back(static_cast<State>(i));
  }
  if (tied.size() == 1) return tied[0];
  std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
  return tied[pick(rng)];
}

Vector exact_root_posterior(const Phylogeny& phy, const RateModel& model, std::span<const State> leaves_by_label) {
  const int q = model.q();
  if (model.is_symmetric()) return potts_posterior(phy, q, leaves_by_label);
  std::vector<Matrix> transition(phy.node_count());
  for (int v = 1; v < phy.node_count(); ++v) transition[v] = model.transition(phy.edge_length(v));
  return prune(phy, q, leaves_by_label, model.pi(), [&](int v, const Vector& x) -> Vector {
    return transition[v] * x;
  });
}

std::string_view to_string(RootEstimator estimator) {
  switch (estimator) {
    case RootEstimator::kDiluted: return "diluted";
    case RootEstimator::kMajority: return "majority";
    case RootEstimator::kPosterior: return "posterior";
  }
  return "?";
}

RootEstimator parse_root_estimator(std::string_view name) {
  if (name == "diluted") return RootEstimator::kDiluted;
  if (name == "majority") return RootEstimator::kMajority;
  if (name == "posterior") return RootEstimator::kPosterior;
  throw InvalidParameter("unknown estimator '" + std::string(name) + "'");
}

double potts_length_from_diagonal(int q, double diagonal) {
  if (diagonal >= 1.0) return 0.0;
  const double arg = 1.0 - q * (1.0 - diagonal) / (q - 1.0);
  return arg > 0.0 ? -std::log(arg) : kInf;
}

ErrorChannelEstimate estimate_error_channel(const Phylogeny& phy, int q, int l, std::size_t trials, Rng& rng,
                                            RootEstimator estimator) {
  if (q < 2 || q > kMaxStates) throw InvalidParameter("q must be in [2, 256]");
  if (l < 1) throw InvalidParameter("dilution step l must be >= 1");
  if (trials < 1) throw InvalidParameter("need at least one trial");
  const int n = phy.leaf_count();
  const int levels = phy.levels();
  const ClusterSampler sampler(phy, q);
  std::vector<State> states(phy.node_count());
  std::vector<State> by_label(n);
  std::vector<char> flags;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(q, q);
  std::size_t correct = 0;
  std::size_t eps_hits = 0;
  std::size_t fp_hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    sampler.sample(rng, states);
    const State root = states[0];
    const std::span<const State> leaves(states.data() + (n - 1), n);
    State guess = 0;
    switch (estimator) {
      case RootEstimator::kDiluted:
        guess = diluted_root_estimator(leaves, levels, l, q, rng);
        eps_hits += event_with_scratch(leaves, levels, root, l, flags);
        fp_hits += event_with_scratch(leaves, levels, other_state(root, q, rng), l, flags);
        break;
      case RootEstimator::kMajority:
        guess = majority_root_estimator(leaves, q, rng);
        break;
      case RootEstimator::kPosterior: {
        for (int p = 0; p < n; ++p) by_label[phy.leaf_label(p) - 1] = leaves[p];
        const Vector post = potts_posterior(phy, q, by_label);
        // Ties in the posterior argmax are broken uniformly.
        const double best = post.maxCoeff();
        std::vector<State> tied;
        for (int i = 0; i < q; ++i) {
          if (post(i) >= best * (1.0 - 1e-12)) tied.push_back(static_cast<State>(i));
        }
        std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
        guess = tied.size() == 1 ? tied[0] : tied[pick(rng)];
        break;
      }
    }
    counts(root, guess) += 1.0;
    correct += guess == root;
  }

  ErrorChannelEstimate out;
  out.sample_count = trials;
  out.row_counts.resize(q);
  out.matrix = Matrix(q, q);
  for (int i = 0; i < q; ++i) {
    const double total = counts.row(i).sum();
    out.row_counts[i] = static_cast<std::size_t>(total);
    out.matrix.row(i) = total > 0 ? Eigen::RowVectorXd(counts.row(i) / total)
                                  : Eigen::RowVectorXd::Constant(q, 1.0 / q);
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(trials);
  out.mean_diagonal = accuracy;
  out.diagonal_stderr = std::sqrt(accuracy * (1.0 - accuracy) / static_cast<double>(trials));
  out.no_signal = accuracy <= 1.0 / q;
  out.b_hat = potts_length_from_diagonal(q, accuracy);
  if (estimator == RootEstimator::kDiluted) {
    out.epsilon = static_cast<double>(eps_hits) / static_cast<double>(trials);
    out.false_positive = static_cast<double>(fp_hits) / static_cast<double>(trials);
    out.b_bar = out.epsilon > 0.0 ? -std::log(out.epsilon / (2.0 * (q - 1))) : kInf;
  } else {
    out.b_bar = std::numeric_limits<double>::quiet_NaN();
  }
  if (levels == 0) out.b_bar = 0.0;
  return out;
}

DilutionCalibration calibrate_dilution(int q, double g, int max_levels, Rng& rng, std::size_t trials) {
  if (q < 2 || q > kMaxStates) throw InvalidParameter("q must be in [2, 256]");
  if (!(g >= 0.0) || !(g < std::log(2.0))) throw InvalidParameter("calibration needs 0 <= g < ln 2");
  if (max_levels < 1 || max_levels > 20) throw InvalidParameter("max_levels must be in [1, 20]");
  if (trials < 1) throw InvalidParameter("need at least one trial");
  const Phylogeny phy = Phylogeny::uniform(max_levels, g);
  const ClusterSampler sampler(phy, q);
  const int n = phy.leaf_count();
  std::vector<State> states(phy.node_count());
  std::vector<char> flags;
  std::vector<std::size_t> eps_hits(max_levels + 1, 0);
  std::vector<std::size_t> fp_hits(max_levels + 1, 0);
  for (std::size_t t = 0; t < trials; ++t) {
    sampler.sample(rng, states);
    const State root = states[0];
    const State other = other_state(root, q, rng);
    const std::span<const State> leaves(states.data() + (n - 1), n);
    for (int l = 1; l <= max_levels; ++l) {
      eps_hits[l] += event_with_scratch(leaves, max_levels, root, l, flags);
      fp_hits[l] += event_with_scratch(leaves, max_levels, other, l, flags);
    }
  }
  DilutionCalibration out;
  out.depth = max_levels;
  const double count = static_cast<double>(trials);
  for (int l = 1; l <= max_levels; ++l) {
    CalibrationRow row;
    row.l = l;
    row.epsilon = static_cast<double>(eps_hits[l]) / count;
    row.false_positive = static_cast<double>(fp_hits[l]) / count;
    row.stderr_epsilon = std::sqrt(row.epsilon * (1.0 - row.epsilon) / count);
    row.accepted = row.epsilon >= 2.0 * row.false_positive && row.epsilon > 3.0 * row.stderr_epsilon;
    if (row.accepted && out.l == 0) {
      out.l = l;
      out.epsilon = row.epsilon;
    }
    out.table.push_back(row);
  }
  if (out.l == 0) throw CalibrationFailure("no dilution step satisfies the calibration inequalities", out.table);
  return out;
}

}  // namespace ksb
