#include "ksb/reconstruct.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace ksb {

SplitRelations::SplitRelations(int vertex_count)
    : m_(vertex_count),
      together_(static_cast<std::size_t>(vertex_count) * vertex_count, 0),
      separated_(static_cast<std::size_t>(vertex_count) * vertex_count, 0) {
  if (vertex_count < 0) throw InvalidParameter("negative vertex count");
}

void SplitRelations::add(int a, int b, int c, int d) {
  for (int x : {a, b, c, d}) {
    if (x < 0 || x >= m_) throw InvalidParameter("split vertex out of range");
  }
  auto bump = [this](std::vector<int>& table, int u, int v) {
    ++table[index(u, v)];
    ++table[index(v, u)];
  };
  bump(together_, a, b);
  bump(together_, c, d);
  bump(separated_, a, c);
  bump(separated_, a, d);
  bump(separated_, b, c);
  bump(separated_, b, d);
}

void SplitRelations::add(const QuartetSplit& split) {
  const auto sides = split.sides();
  add(sides[0][0], sides[0][1], sides[1][0], sides[1][1]);
}

std::vector<CandidateEntry> SplitRelations::table() const {
  std::vector<CandidateEntry> out;
  for (int u = 0; u < m_; ++u) {
    for (int v = u + 1; v < m_; ++v) {
      if (together(u, v) > 0 || separated(u, v) > 0) out.push_back({u, v, together(u, v), separated(u, v)});
    }
  }
  return out;
}

std::vector<std::pair<int, int>> identify_cherries(const SplitRelations& relations) {
  const int m = relations.vertex_count();
  if (m % 2 != 0 || m < 2) throw InvalidParameter("cherry matching needs an even number (>= 2) of vertices");
  if (m == 2) return {{0, 1}};
  std::vector<int> partner(m, -1);
  for (int u = 0; u < m; ++u) {
    int count = 0;
    for (int v = 0; v < m; ++v) {
      if (v != u && relations.together(u, v) > 0 && relations.separated(u, v) == 0) {
        partner[u] = v;
        ++count;
      }
    }
    if (count != 1) {
      throw MatchingFailure("vertex " + std::to_string(u) + " has " + std::to_string(count) +
                                " candidate partners",
                            relations.table());
    }
  }
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < m; ++u) {
    if (partner[partner[u]] != u) {
      throw MatchingFailure("candidate pairs do not form a matching at vertex " + std::to_string(u),
                            relations.table());
    }
    if (u < partner[u]) pairs.emplace_back(u, partner[u]);
  }
  return pairs;
}

std::vector<std::pair<int, int>> identify_cherries(const std::vector<QuartetSplit>& splits, int vertex_count) {
  SplitRelations relations(vertex_count);
  for (const auto& s : splits) {
    if (s.pairing != Pairing::kUndetermined) relations.add(s);
  }
  return identify_cherries(relations);
}

Alignment reconstruct_internal_sequences(const Alignment& leaves, const std::vector<std::vector<int>>& groups,
                                         RootEstimator estimator, int l, Rng& rng) {
  if (estimator == RootEstimator::kPosterior) {
    throw InvalidParameter("internal sequences need the diluted or majority estimator");
  }
  const int q = leaves.q();
  const std::size_t sites = leaves.sites();
  std::vector<std::string> labels;
  for (std::size_t g = 0; g < groups.size(); ++g) labels.push_back("u" + std::to_string(g));
  Alignment out(q, sites, std::move(labels));
  std::vector<State> column;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& rows = groups[g];
    if (rows.empty() || !std::has_single_bit(rows.size())) {
      throw InvalidParameter("descendant groups must hold 2^levels leaves");
    }
    const int levels = std::countr_zero(rows.size());
    column.resize(rows.size());
    auto target = out.row(g);
    for (std::size_t site = 0; site < sites; ++site) {
      for (std::size_t j = 0; j < rows.size(); ++j) column[j] = leaves.at(rows[j], site);
      target[site] = estimator == RootEstimator::kDiluted ? diluted_root_estimator(column, levels, l, q, rng)
                                                         : majority_root_estimator(column, q, rng);
    }
  }
  return out;
}

ReconstructionResult reconstruct_homogeneous(const Alignment& aln, const ReconstructParams& params, Rng& rng) {
  const Alignment leaves = aln.leaves_only();
  const int n = static_cast<int>(leaves.rows());
  if (n < 2 || !std::has_single_bit(static_cast<unsigned>(n))) {
    throw InvalidParameter("reconstruction needs 2^h >= 2 leaves labeled 1..n");
  }
  if (params.D.empty()) throw InvalidParameter("no gate parameter D given");
  if (!(params.W > 0.0) || !(params.f_min > 0.0) || params.l < 1) {
    throw InvalidParameter("need W > 0, f_min > 0 and l >= 1");
  }
  if (params.estimator == RootEstimator::kPosterior) {
    throw InvalidParameter("internal sequences need the diluted or majority estimator");
  }
  const int levels = std::countr_zero(static_cast<unsigned>(n));
  if (params.D.size() != 1 && static_cast<int>(params.D.size()) < levels) {
    throw InvalidParameter("need one D value or one per level");
  }

  // Active vertices: descendant leaf rows in subtree order and topology id.
  std::vector<std::vector<int>> members(n);
  std::vector<int> ids(n);
  for (int a = 0; a < n; ++a) {
    members[a] = {a};
    ids[a] = a;
  }
  int next_id = n;
  std::vector<std::pair<int, int>> edges;
  Alignment sequences = leaves;
  ReconstructionResult result{Topology(2, {{0, 1}}), {}};

  for (int level = 0; level < levels; ++level) {
    const int m = static_cast<int>(members.size());
    LevelReport report;
    report.level = level;
    report.vertices = m;
    report.D = params.D.size() == 1 ? params.D[0] : params.D[level];

    std::vector<double> values(static_cast<std::size_t>(m) * m, 0.0);
    std::vector<int> labels_u, labels_v;
    for (int u = 0; u < m; ++u) {
      for (int v = u + 1; v < m; ++v) {
        double d = 0.0;
        if (params.distance_hook) {
          labels_u.clear();
          labels_v.clear();
          for (int r : members[u]) labels_u.push_back(r + 1);
          for (int r : members[v]) labels_v.push_back(r + 1);
          d = params.distance_hook(labels_u, labels_v);
        } else {
          d = estimate_distance(sequences.row(u), sequences.row(v), sequences.q());
        }
        values[static_cast<std::size_t>(u) * m + v] = d;
        values[static_cast<std::size_t>(v) * m + u] = d;
      }
    }
    std::vector<std::string> names(m);
    for (int u = 0; u < m; ++u) names[u] = std::to_string(u);
    const DistortedMetric metric(std::move(names), std::move(values), report.D, params.W);

    // Four-point tests over all 4-subsets that pass the diameter gate.
    SplitRelations relations(m);
    const double gate = metric.gate();
    auto near = [&](int u, int v) { return metric(u, v) <= gate; };
    for (int a = 0; a < m; ++a) {
      for (int b = a + 1; b < m; ++b) {
        if (!near(a, b)) continue;
        for (int c = b + 1; c < m; ++c) {
          if (!near(a, c) || !near(b, c)) continue;
          for (int d = c + 1; d < m; ++d) {
            if (!near(a, d) || !near(b, d) || !near(c, d)) continue;
            ++report.quartets_tested;
            const auto accepted = split_indicator(metric, a, b, c, d, params.f_min);
            if (accepted[0]) relations.add(a, b, c, d);
            if (accepted[1]) relations.add(a, c, b, d);
            if (accepted[2]) relations.add(a, d, b, c);
            report.splits_accepted += accepted[0] + accepted[1] + accepted[2];
          }
        }
      }
    }

    std::vector<std::pair<int, int>> cherries;
    try {
      cherries = identify_cherries(relations);
    } catch (const MatchingFailure& e) {
      std::vector<std::vector<int>> vertex_leaves;
      for (const auto& rows : members) {
        vertex_leaves.emplace_back();
        for (int r : rows) vertex_leaves.back().push_back(r + 1);
      }
      std::vector<double> distances(static_cast<std::size_t>(m) * m);
      for (int u = 0; u < m; ++u) {
        for (int v = 0; v < m; ++v) distances[static_cast<std::size_t>(u) * m + v] = metric(u, v);
      }
      throw ReconstructionFailure(level, e, std::move(vertex_leaves), std::move(distances));
    }
    result.levels.push_back(report);

    std::vector<std::vector<int>> next_members;
    std::vector<int> next_ids;
    for (const auto& [u, v] : cherries) {
      std::vector<int> joined = members[u];
      joined.insert(joined.end(), members[v].begin(), members[v].end());
      next_members.push_back(std::move(joined));
      edges.emplace_back(next_id, ids[u]);
      edges.emplace_back(next_id, ids[v]);
      next_ids.push_back(next_id++);
    }
    members = std::move(next_members);
    ids = std::move(next_ids);
    if (level + 1 < levels && !params.distance_hook) {
      sequences = reconstruct_internal_sequences(leaves, members, params.estimator, params.l, rng);
    }
  }
  result.topology = Topology(n, edges);
  return result;
}

RootEstimator choose_estimator(double g) {
  if (g < std::log(std::sqrt(2.0)) || g >= std::log(2.0)) return RootEstimator::kMajority;
  return RootEstimator::kDiluted;
}

std::vector<double> default_gate_schedule(int q, double f, double g, int levels, std::size_t sites,
                                          RootEstimator estimator, int l, std::size_t trials, Rng& rng) {
  if (!(f > 0.0) || !(f <= g)) throw InvalidParameter("branch length bounds need 0 < f <= g");
  const double lower_weight = 1.75;
  std::vector<double> gates;
  for (int level = 0; level < levels; ++level) {
    double bias = 0.0;
    if (level > 0) {
      bias = estimate_error_channel(Phylogeny::uniform(level, g), q, l, trials, rng, estimator).b_hat;
      if (!std::isfinite(bias)) bias = 0.0;
    }
    const double cousins = 4.0 * g + 2.0 * bias;
    const double next = 6.0 * f + 2.0 * bias;
    const double se_cousins = lower_weight * distance_stderr(cousins, q, sites);
    if (next <= cousins) {
      gates.push_back(cousins + 3.0 * se_cousins);
      continue;
    }
    const double se_next = distance_stderr(next, q, sites);
    gates.push_back((cousins * se_next + next * se_cousins) / (se_cousins + se_next));
  }
  return gates;
}

ReconstructParams default_params(int q, double f, double g, int levels, std::size_t sites, Rng& rng,
                                 std::size_t trials, std::optional<RootEstimator> estimator, int l) {
  if (!(f > 0.0) || !(f <= g)) throw InvalidParameter("branch length bounds need 0 < f <= g");
  ReconstructParams p;
  p.f_min = f;
  p.estimator = estimator.value_or(choose_estimator(g));
  if (p.estimator == RootEstimator::kPosterior) {
    throw InvalidParameter("internal sequences need the diluted or majority estimator");
  }
  if (p.estimator == RootEstimator::kDiluted) {
    if (l > 0) {
      p.l = l;
    } else if (g < std::log(2.0)) {
      const int depth = std::clamp(levels - 1, 1, 20);
      try {
        p.l = calibrate_dilution(q, g, depth, rng).l;
      } catch (const CalibrationFailure& e) {
        // Fall back to the step with the widest margin between the two rates.
        const auto& table = e.table();
        const auto best = std::max_element(table.begin(), table.end(), [](const auto& x, const auto& y) {
          return x.epsilon - x.false_positive < y.epsilon - y.false_positive;
        });
        p.l = best->l;
      }
    }
  }
  p.D.clear();
  for (double gate : default_gate_schedule(q, f, g, std::max(levels, 1), sites, p.estimator, p.l, trials, rng)) {
    p.D.push_back(gate - std::log(p.W / 4.0));
  }
  return p;
}

}  // namespace ksb
