#include "ksb/simulate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace ksb {

namespace {

int draw(std::span<const double> cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min(static_cast<int>(it - cdf.begin()), static_cast<int>(cdf.size()) - 1);
}

void check_q(int q) {
  if (q < 2 || q > kMaxStates) throw InvalidParameter("q must be in [2, 256]");
}

// Union-find with path compression.
class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) { parent_[find(a)] = find(b); }

 private:
  std::vector<int> parent_;
};

}  // namespace

Alignment::Alignment(int q, std::size_t sites, std::vector<std::string> labels)
    : q_(q), sites_(sites), labels_(std::move(labels)), data_(labels_.size() * sites, 0) {
  check_q(q);
}

Alignment Alignment::leaves_only() const {
  std::vector<std::pair<int, std::size_t>> leaves;
  for (std::size_t r = 0; r < rows(); ++r) {
    int value = 0;
    const auto& s = labels_[r];
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec == std::errc() && ptr == s.data() + s.size() && value >= 1) leaves.emplace_back(value, r);
  }
  std::sort(leaves.begin(), leaves.end());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i].first != static_cast<int>(i) + 1) {
      throw InvalidParameter("alignment leaf labels must be exactly 1..n");
    }
  }
  std::vector<std::string> labels;
  for (const auto& [label, r] : leaves) labels.push_back(std::to_string(label));
  Alignment out(q_, sites_, std::move(labels));
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    std::copy(row(leaves[i].second).begin(), row(leaves[i].second).end(), out.row(i).begin());
  }
  return out;
}

BroadcastSampler::BroadcastSampler(const Phylogeny& phy, const RateModel& model)
    : q_(model.q()), nodes_(phy.node_count()), matrix_of_node_(phy.node_count(), -1) {
  check_q(q_);
  root_cdf_.resize(q_);
  std::partial_sum(model.pi().data(), model.pi().data() + q_, root_cdf_.begin());
  std::map<double, int> by_length;
  for (int v = 1; v < nodes_; ++v) {
    const double tau = phy.edge_length(v);
    auto [it, inserted] = by_length.emplace(tau, static_cast<int>(cdfs_.size()));
    if (inserted) {
      const Matrix m = model.transition(tau);
      std::vector<double> cdf(static_cast<std::size_t>(q_) * q_);
      for (int i = 0; i < q_; ++i) {
        double acc = 0.0;
        for (int j = 0; j < q_; ++j) {
          acc += m(i, j);
          cdf[static_cast<std::size_t>(i) * q_ + j] = acc;
        }
      }
      cdfs_.push_back(std::move(cdf));
    }
    matrix_of_node_[v] = it->second;
  }
}

void BroadcastSampler::sample(Rng& rng, std::span<State> states) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  states[0] = static_cast<State>(draw(root_cdf_, unif(rng)));
  for (int v = 1; v < nodes_; ++v) {
    const int parent_state = states[Phylogeny::parent(v)];
    const auto& cdf = cdfs_[matrix_of_node_[v]];
    std::span<const double> row(cdf.data() + static_cast<std::size_t>(parent_state) * q_, q_);
    states[v] = static_cast<State>(draw(row, unif(rng)));
  }
}

std::vector<State> BroadcastSampler::sample(Rng& rng) const {
  std::vector<State> states(nodes_);
  sample(rng, states);
  return states;
}

ClusterSampler::ClusterSampler(const Phylogeny& phy, int q)
    : q_(q), nodes_(phy.node_count()), open_probability_(phy.node_count(), 1.0) {
  check_q(q);
  for (int v = 1; v < nodes_; ++v) open_probability_[v] = std::exp(-phy.edge_length(v));
}

void ClusterSampler::sample(Rng& rng, std::span<State> states) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> color(0, q_ - 1);
  DisjointSets clusters(nodes_);
  for (int v = 1; v < nodes_; ++v) {
    if (unif(rng) < open_probability_[v]) clusters.unite(v, Phylogeny::parent(v));
  }
  std::vector<int> cluster_state(nodes_, -1);
  for (int v = 0; v < nodes_; ++v) {
    const int root = clusters.find(v);
    if (cluster_state[root] < 0) cluster_state[root] = color(rng);
    states[v] = static_cast<State>(cluster_state[root]);
  }
}

std::vector<State> ClusterSampler::sample(Rng& rng) const {
  std::vector<State> states(nodes_);
  sample(rng, states);
  return states;
}

std::vector<State> broadcast_sample(const Phylogeny& phy, const RateModel& model, Rng& rng) {
  return BroadcastSampler(phy, model).sample(rng);
}

std::vector<State> random_cluster_sample(const Phylogeny& phy, const RateModel& model, Rng& rng) {
  if (!model.is_symmetric()) {
    throw UnsupportedModel("the random-cluster sampler needs the symmetric (Potts) model");
  }
  return random_cluster_sample(phy, model.q(), rng);
}

std::vector<State> random_cluster_sample(const Phylogeny& phy, int q, Rng& rng) {
  return ClusterSampler(phy, q).sample(rng);
}

SampledData sample_alignment(const Phylogeny& phy, const RateModel& model, std::size_t sites, Rng& rng,
                             SamplerKind sampler, bool keep_internal) {
  if (sites < 1) throw InvalidParameter("need at least one site");
  if (sampler == SamplerKind::kRandomCluster && !model.is_symmetric()) {
    throw UnsupportedModel("the random-cluster sampler needs the symmetric (Potts) model");
  }
  const int n = phy.leaf_count();
  const int nodes = phy.node_count();
  std::vector<std::string> leaf_labels(n);
  for (int a = 0; a < n; ++a) leaf_labels[a] = std::to_string(a + 1);
  SampledData out{Alignment(model.q(), sites, std::move(leaf_labels)), std::nullopt};
  if (keep_internal) {
    std::vector<std::string> labels;
    for (int v = 0; v < n - 1; ++v) labels.push_back("i" + std::to_string(v));
    out.hidden = Alignment(model.q(), sites, std::move(labels));
  }

  std::optional<BroadcastSampler> broadcast;
  std::optional<ClusterSampler> cluster;
  if (sampler == SamplerKind::kBroadcast) {
    broadcast.emplace(phy, model);
  } else {
    cluster.emplace(phy, model.q());
  }
  std::vector<State> states(nodes);
  std::vector<State*> leaf_rows(n);
  for (int p = 0; p < n; ++p) leaf_rows[p] = out.leaves.row(phy.leaf_label(p) - 1).data();
  for (std::size_t site = 0; site < sites; ++site) {
    if (broadcast) {
      broadcast->sample(rng, states);
    } else {
      cluster->sample(rng, states);
    }
    for (int p = 0; p < n; ++p) leaf_rows[p][site] = states[phy.leaf_node(p)];
    if (out.hidden) {
      for (int v = 0; v < n - 1; ++v) out.hidden->row(v)[site] = states[v];
    }
  }
  return out;
}

std::size_t leaf_pattern_index(std::span<const State> by_label, int q) {
  std::size_t index = 0;
  for (std::size_t a = by_label.size(); a-- > 0;) index = index * q + by_label[a];
  return index;
}

std::vector<double> exact_leaf_distribution(const Phylogeny& phy, const RateModel& model) {
  const int q = model.q();
  const int n = phy.leaf_count();
  if (n * std::log(static_cast<double>(q)) > std::log(kMaxExactOutcomes) + 1e-9) {
    throw InstanceTooLarge("q^n exceeds 10^6 outcomes");
  }
  const auto outcomes = static_cast<std::size_t>(std::llround(std::pow(q, n)));
  const int nodes = phy.node_count();
  std::vector<Matrix> transition(nodes);
  for (int v = 1; v < nodes; ++v) transition[v] = model.transition(phy.edge_length(v));

  std::vector<double> table(outcomes);
  std::vector<State> by_label(n);
  std::vector<Vector> partial(nodes, Vector(q));
  for (std::size_t index = 0; index < outcomes; ++index) {
    std::size_t rest = index;
    for (int a = 0; a < n; ++a) {
      by_label[a] = static_cast<State>(rest % q);
      rest /= q;
    }
    for (int v = nodes - 1; v >= 0; --v) {
      if (phy.is_leaf(v)) {
        partial[v].setZero();
        partial[v](by_label[phy.leaf_label(v - (n - 1)) - 1]) = 1.0;
      } else {
        const int l = Phylogeny::left(v);
        const int r = Phylogeny::right(v);
        partial[v] = (transition[l] * partial[l]).cwiseProduct(transition[r] * partial[r]);
      }
    }
    table[index] = model.pi().dot(partial[0]);
  }
  return table;
}

void write_alignment(std::ostream& out, const Alignment& aln) {
  out << "q=" << aln.q() << " k=" << aln.sites() << '\n';
  for (std::size_t r = 0; r < aln.rows(); ++r) {
    out << aln.label(r) << '\t';
    const auto row = aln.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ' ';
      out << static_cast<int>(row[i]) + 1;
    }
    out << '\n';
  }
}

Alignment read_alignment(std::istream& in) {
  std::string line;
  int q = 0;
  long long sites = -1;
  bool have_header = false;
  std::vector<std::string> labels;
  std::vector<std::vector<State>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    if (!have_header) {
      std::string a, b;
      fields >> a >> b;
      if (a.rfind("q=", 0) != 0 || b.rfind("k=", 0) != 0) {
        throw ParseError("alignment header must read 'q=<q> k=<k>'", line_no);
      }
      q = std::stoi(a.substr(2));
      sites = std::stoll(b.substr(2));
      if (q < 2 || q > kMaxStates || sites < 1) throw ParseError("invalid q or k in alignment header", line_no);
      have_header = true;
      continue;
    }
    std::string label;
    fields >> label;
    std::vector<State> row;
    row.reserve(static_cast<std::size_t>(sites));
    int value = 0;
    while (fields >> value) {
      if (value < 1 || value > q) throw ParseError("state out of range 1..q", line_no);
      row.push_back(static_cast<State>(value - 1));
    }
    if (!fields.eof()) throw ParseError("non-integer state", line_no);
    if (static_cast<long long>(row.size()) != sites) {
      throw ParseError("row '" + label + "' has " + std::to_string(row.size()) + " sites, expected " +
                           std::to_string(sites),
                       line_no);
    }
    labels.push_back(label);
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError("missing alignment header", line_no);
  Alignment aln(q, static_cast<std::size_t>(sites), labels);
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), aln.row(r).begin());
  return aln;
}

}  // namespace ksb
