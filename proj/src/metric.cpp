#include "ksb/metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace ksb {

double distance_from_disagreements(std::size_t disagreements, std::size_t sites, int q) {
  if (sites == 0) throw InvalidParameter("need at least one site");
  const double fraction = static_cast<double>(disagreements) / static_cast<double>(sites);
  const double arg = 1.0 - (static_cast<double>(q) / (q - 1)) * fraction;
  return arg > 0.0 ? -std::log(arg) : kInfinity;
}

double distance_stderr(double tau, int q, std::size_t sites) {
  if (q < 2 || sites == 0 || !(tau >= 0.0)) throw InvalidParameter("need q >= 2, sites >= 1, tau >= 0");
  const double p = (q - 1.0) / q * (1.0 - std::exp(-tau));
  return q / (q - 1.0) * std::exp(tau) * std::sqrt(p * (1.0 - p) / static_cast<double>(sites));
}

double estimate_distance(std::span<const State> u, std::span<const State> v, int q) {
  if (u.size() != v.size()) throw InvalidParameter("sequences have different lengths");
  if (q < 2) throw InvalidParameter("q must be >= 2");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < u.size(); ++i) diff += u[i] != v[i];
  return distance_from_disagreements(diff, u.size(), q);
}

DistortedMetric::DistortedMetric(std::vector<std::string> labels, std::vector<double> values, double D, double W)
    : labels_(std::move(labels)), values_(std::move(values)), D_(D), W_(W), gate_(D + std::log(W / 4.0)) {
  const std::size_t m = labels_.size();
  if (values_.size() != m * m) throw InvalidParameter("distance matrix has the wrong size");
  if (!(W > 0.0)) throw InvalidParameter("W must be positive");
  for (std::size_t u = 0; u < m; ++u) {
    if (values_[u * m + u] != 0.0) throw InvalidParameter("distance matrix needs a zero diagonal");
    for (std::size_t v = 0; v < u; ++v) {
      if (values_[u * m + v] != values_[v * m + u]) throw InvalidParameter("distance matrix is not symmetric");
      if (!(values_[u * m + v] >= 0.0)) throw InvalidParameter("distances must be >= 0");
    }
  }
}

DistortedMetric DistortedMetric::from_alignment(const Alignment& aln, double D, double W) {
  const std::size_t m = aln.rows();
  std::vector<double> values(m * m, 0.0);
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = u + 1; v < m; ++v) {
      const double d = estimate_distance(aln.row(u), aln.row(v), aln.q());
      values[u * m + v] = d;
      values[v * m + u] = d;
    }
  }
  return DistortedMetric(aln.labels(), std::move(values), D, W);
}

std::string_view to_string(Pairing p) {
  switch (p) {
    case Pairing::kAbCd: return "ab|cd";
    case Pairing::kAcBd: return "ac|bd";
    case Pairing::kAdBc: return "ad|bc";
    case Pairing::kUndetermined: return "undetermined";
  }
  return "?";
}

std::array<std::array<int, 2>, 2> QuartetSplit::sides() const {
  const auto [a, b, c, d] = vertices;
  switch (pairing) {
    case Pairing::kAbCd: return {{{a, b}, {c, d}}};
    case Pairing::kAcBd: return {{{a, c}, {b, d}}};
    case Pairing::kAdBc: return {{{a, d}, {b, c}}};
    case Pairing::kUndetermined: break;
  }
  throw InvalidParameter("undetermined quartet has no sides");
}

double quartet_diameter(const DistortedMetric& m, int a, int b, int c, int d) {
  return std::max({m(a, b), m(a, c), m(a, d), m(b, c), m(b, d), m(c, d)});
}

namespace {

// Gated when the diameter exceeds the gate or any estimate saturated.
bool gated(const DistortedMetric& m, int a, int b, int c, int d) {
  const double diameter = quartet_diameter(m, a, b, c, d);
  return !std::isfinite(diameter) || diameter > m.gate();
}

}  // namespace

double four_point_value(const DistortedMetric& m, int a, int b, int c, int d) {
  if (gated(m, a, b, c, d)) return kInfinity;
  return four_point(m, a, b, c, d);
}

QuartetSplit four_point_split(const DistortedMetric& m, int a, int b, int c, int d) {
  QuartetSplit out{{a, b, c, d}, Pairing::kUndetermined};
  if (gated(m, a, b, c, d)) return out;
  const double value = four_point(m, a, b, c, d);
  // Rounding residue counts as zero, so exact metrics give exact ties.
  const double tol = 1e-12 * (m(a, c) + m(b, d) + m(a, b) + m(c, d));
  out.pairing = value > tol ? Pairing::kAbCd : value < -tol ? Pairing::kAcBd : Pairing::kAdBc;
  return out;
}

std::array<bool, 3> fp_indicator(const DistortedMetric& m, int a, int b, int c, int d, double f_min) {
  if (!(f_min > 0.0)) throw InvalidParameter("f_min must be positive");
  if (gated(m, a, b, c, d)) return {false, false, false};
  const double half = f_min / 2.0;
  return {four_point(m, a, b, c, d) > half, four_point(m, a, c, b, d) > half, four_point(m, a, d, b, c) > half};
}

std::array<bool, 3> split_indicator(const DistortedMetric& m, int a, int b, int c, int d, double f_min) {
  if (!(f_min > 0.0)) throw InvalidParameter("f_min must be positive");
  if (gated(m, a, b, c, d)) return {false, false, false};
  // fp(x,y|z,w) compares xy|zw against xz|yw and fp(y,x|z,w) against xw|yz,
  // so both labelings together compare each split with both alternatives.
  const double ab_cd = m(a, b) + m(c, d);
  const double ac_bd = m(a, c) + m(b, d);
  const double ad_bc = m(a, d) + m(b, c);
  auto wins = [f_min](double own, double other1, double other2) {
    return 0.5 * (other1 - own) > f_min / 2.0 && 0.5 * (other2 - own) > f_min / 2.0;
  };
  return {wins(ab_cd, ac_bd, ad_bc), wins(ac_bd, ab_cd, ad_bc), wins(ad_bc, ab_cd, ac_bd)};
}

void write_distance_tsv(std::ostream& out, const DistortedMetric& m) {
  const int size = m.size();
  for (int u = 0; u < size; ++u) out << (u > 0 ? "\t" : "") << m.labels()[u];
  out << '\n';
  char buf[64];
  for (int u = 0; u < size; ++u) {
    for (int v = 0; v < size; ++v) {
      if (v > 0) out << '\t';
      const double d = m(u, v);
      if (std::isinf(d)) {
        out << "inf";
      } else {
        std::snprintf(buf, sizeof(buf), "%.9g", d);
        out << buf;
      }
    }
    out << '\n';
  }
}

ConcentrationReport distance_concentration_check(const Phylogeny& phy, const RateModel& model, std::size_t sites,
                                                 double D, double delta, double W, std::size_t trials, Rng& rng) {
  if (!(D > 0.0) || !(delta > 0.0) || !(W > 5.0)) {
    throw InvalidParameter("need D > 0, delta > 0 and W > 5");
  }
  if (trials < 1 || sites < 1) throw InvalidParameter("need at least one trial and one site");
  if (phy.levels() < 1) throw InvalidParameter("need at least two leaves");
  const int n = phy.leaf_count();
  const TreeMetric truth(phy);
  const double large_cut = D + std::log(W);
  const double large_bound = D + std::log(W / 2.0);
  const double small_cut = D + std::log(W / 5.0);
  const double gate = D + std::log(W / 4.0);

  std::size_t short_ok = 0, short_total = 0, large_ok = 0, large_total = 0, small_ok = 0, small_total = 0;
  std::size_t gate_ok = 0, gate_total = 0, short_trials_ok = 0, gate_trials_ok = 0;
  // Per-pair gate hits, indexed (a - 1) * n + (b - 1); pairs outside both
  // classes stay at trials.
  std::vector<std::size_t> pair_ok(static_cast<std::size_t>(n) * n, trials);
  for (std::size_t t = 0; t < trials; ++t) {
    const SampledData data = sample_alignment(phy, model, sites, rng);
    const std::size_t short_before = short_total - short_ok, gate_before = gate_total - gate_ok;
    for (int a = 1; a <= n; ++a) {
      for (int b = a + 1; b <= n; ++b) {
        const double tau = truth.between_labels(a, b);
        const double est = estimate_distance(data.leaves.row(a - 1), data.leaves.row(b - 1), model.q());
        if (tau < D) {
          ++short_total;
          short_ok += std::abs(est - tau) < delta;
        }
        if (tau > large_cut) {
          ++large_total;
          large_ok += est > large_bound;
          ++gate_total;
          gate_ok += est > gate;
          pair_ok[static_cast<std::size_t>(a - 1) * n + (b - 1)] -= !(est > gate);
        }
        if (tau < small_cut) {
          ++small_total;
          small_ok += est <= gate;
          ++gate_total;
          gate_ok += est <= gate;
          pair_ok[static_cast<std::size_t>(a - 1) * n + (b - 1)] -= !(est <= gate);
        }
      }
    }
    short_trials_ok += short_total - short_ok == short_before;
    gate_trials_ok += gate_total - gate_ok == gate_before;
  }
  auto rate = [](std::size_t ok, std::size_t total) {
    return total == 0 ? 1.0 : static_cast<double>(ok) / static_cast<double>(total);
  };
  ConcentrationReport r;
  r.trials = trials;
  r.sites = sites;
  r.c_prime = static_cast<double>(sites) / std::log(static_cast<double>(n));
  r.target = 1.0 - 1.0 / n;
  r.short_pairs = short_total / trials;
  r.short_rate = rate(short_ok, short_total);
  r.large_pairs = large_total / trials;
  r.large_rate = rate(large_ok, large_total);
  r.small_pairs = small_total / trials;
  r.small_rate = rate(small_ok, small_total);
  r.gate_rate = rate(gate_ok, gate_total);
  r.short_trial_rate = rate(short_trials_ok, trials);
  r.gate_trial_rate = rate(gate_trials_ok, trials);
  r.gate_worst_pair_rate = rate(*std::min_element(pair_ok.begin(), pair_ok.end()), trials);
  r.passed = r.short_rate >= r.target && r.large_rate >= r.target && r.small_rate >= r.target;
  return r;
}

}  // namespace ksb
