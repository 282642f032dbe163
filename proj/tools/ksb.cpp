// ksb: simulate, reconstruct and evaluate homogeneous phylogenies.
//
// Exit codes: 0 success, 1 usage or input error, 2 reconstruction failure,
// 3 verification failure, 4 `compare` found different topologies.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ksb/checks.hpp"
#include "ksb/experiments.hpp"
#include "ksb/newick.hpp"
#include "ksb/reconstruct.hpp"
#include "ksb/simulate.hpp"
#include "ksb/version.hpp"

namespace {

using namespace ksb;

constexpr int kUsage = 1;
constexpr int kReconstructionFailed = 2;
constexpr int kVerificationFailed = 3;
constexpr int kTopologiesDiffer = 4;

// Comment header lines for an output file: version, command and settings.
struct Header {
  explicit Header(std::string name) : command(std::move(name)) {}

  std::string command;
  std::vector<std::pair<std::string, std::string>> settings;

  template <class T>
  Header& add(const std::string& key, const T& value) {
    std::ostringstream out;
    out << value;
    settings.emplace_back(key, out.str());
    return *this;
  }
  void write(std::ostream& out) const {
    out << "# ksb " << kVersion << ' ' << command << '\n';
    for (const auto& [k, v] : settings) out << "# " << k << '=' << v << '\n';
  }
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& given) {
  if (given) return *given;
  std::random_device device;
  const std::uint64_t seed = (static_cast<std::uint64_t>(device()) << 32) ^ device();
  std::cerr << "seed: " << seed << '\n';
  return seed;
}

// Writes to `path`, or stdout when it is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw InvalidParameter("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::string read_text(const std::string& path) {
  if (path.empty() || path == "-") {
    return std::string((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
  }
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Topology read_topology(const std::string& path) {
  std::istringstream in(read_text(path));
  const auto parsed = parse_newick(read_newick_line(in));
  if (const auto* phy = std::get_if<Phylogeny>(&parsed)) return unroot(*phy);
  return std::get<Topology>(parsed);
}

std::string join(const std::vector<double>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

// Leaf rows followed by the internal rows, in one block.
Alignment with_hidden_rows(const SampledData& data) {
  std::vector<std::string> labels = data.leaves.labels();
  labels.insert(labels.end(), data.hidden->labels().begin(), data.hidden->labels().end());
  Alignment all(data.leaves.q(), data.leaves.sites(), labels);
  for (std::size_t r = 0; r < data.leaves.rows(); ++r) std::ranges::copy(data.leaves.row(r), all.row(r).begin());
  for (std::size_t r = 0; r < data.hidden->rows(); ++r) {
    std::ranges::copy(data.hidden->row(r), all.row(data.leaves.rows() + r).begin());
  }
  return all;
}

void write_failure_record(const std::string& path, const ReconstructionFailure& e) {
  nlohmann::json record;
  record["level"] = e.level();
  record["message"] = e.what();
  record["vertices"] = e.vertex_leaves();
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& c : e.table()) {
    pairs.push_back({{"u", c.u}, {"v", c.v}, {"together", c.together}, {"separated", c.separated}});
  }
  record["candidates"] = pairs;
  nlohmann::json distances = nlohmann::json::array();
  for (double d : e.distances()) distances.push_back(std::isfinite(d) ? nlohmann::json(d) : nlohmann::json("inf"));
  record["distances"] = distances;
  std::ofstream out(path);
  if (!out) throw InvalidParameter("cannot write " + path);
  out << record.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and reconstruction of homogeneous phylogenies"};
  // Without -h so that --h (tree height) is free.
  app.set_help_flag("--help", "print this help and exit");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string out_path;

  // gen-tree
  auto* gen = app.add_subcommand("gen-tree", "random homogeneous tree as Newick");
  int gen_h = 3;
  double gen_f = 0.1, gen_g = 0.3;
  gen->add_option("--h", gen_h, "levels (n = 2^h leaves)")->required();
  gen->add_option("--f", gen_f, "smallest branch length")->required();
  gen->add_option("--g", gen_g, "largest branch length")->required();
  gen->add_option("--seed", seed);
  gen->add_option("--out", out_path, "output file (default stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "sample leaf sequences on a tree");
  std::string tree_path, model_path, sampler = "broadcast";
  int sim_q = 0;
  std::size_t sim_k = 0;
  bool keep_internal = false;
  sim->add_option("--tree", tree_path, "rooted tree with branch lengths (Newick)")->required();
  auto* q_opt = sim->add_option("--q", sim_q, "number of states of the symmetric model");
  auto* model_opt = sim->add_option("--model", model_path, "rate model file (q, Q rows, pi)");
  q_opt->excludes(model_opt);
  sim->add_option("--k", sim_k, "number of sites")->required();
  sim->add_option("--sampler", sampler, "broadcast or cluster")->check(CLI::IsMember({"broadcast", "cluster"}));
  sim->add_flag("--internal", keep_internal, "also write internal sequences");
  sim->add_option("--seed", seed);
  sim->add_option("--out", out_path);

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "tree topology from a leaf alignment");
  std::string aln_path, estimator = "auto", failure_path;
  double rec_f = 0.0, rec_g = 0.0, rec_W = 6.0, rec_f_min = 0.0;
  int rec_l = 0;
  std::vector<double> rec_D;
  rec->add_option("--alignment", aln_path, "alignment file (default stdin)");
  rec->add_option("--g", rec_g, "largest branch length")->required();
  rec->add_option("--f", rec_f, "smallest branch length (default g)");
  rec->add_option("--l", rec_l, "dilution step (default calibrated)");
  rec->add_option("--D", rec_D, "gate parameter, one value or one per level");
  rec->add_option("--W", rec_W, "gate width W (gate at D + ln(W/4))");
  rec->add_option("--f-min", rec_f_min, "four-point threshold f (default f)");
  rec->add_option("--estimator", estimator, "auto, diluted or majority")
      ->check(CLI::IsMember({"auto", "diluted", "majority"}));
  rec->add_option("--failure-record", failure_path, "JSON record written on failure");
  rec->add_option("--seed", seed);
  rec->add_option("--out", out_path);

  // asr-eval
  auto* asr = app.add_subcommand("asr-eval", "root-state accuracy of an estimator");
  int asr_q = 2, asr_h = 5, asr_l = 0;
  double asr_tau = 0.2;
  std::size_t asr_trials = 10000;
  std::string asr_estimator = "all";
  asr->add_option("--q", asr_q)->required();
  asr->add_option("--tau", asr_tau)->required();
  asr->add_option("--h", asr_h)->required();
  asr->add_option("--l", asr_l, "dilution step (default calibrated)");
  asr->add_option("--estimator", asr_estimator, "diluted, majority, posterior or all");
  asr->add_option("--trials", asr_trials);
  asr->add_option("--seed", seed);
  asr->add_option("--out", out_path);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a ptr or asr sweep from a config file");
  std::string config_path;
  int jobs = 0;
  sweep->add_option("config", config_path, "key=value or JSON config")->required();
  sweep->add_option("--jobs", jobs, "worker threads");
  sweep->add_option("--seed", seed);
  sweep->add_option("--out", out_path, "CSV output (overrides the config)");

  // probe
  auto* probe = app.add_subcommand("probe", "distinguishability of two deep quartet topologies");
  int probe_q = 2;
  double probe_tau = 0.9;
  std::vector<int> depths{2, 3, 4};
  std::size_t probe_k = 100, probe_trials = 1000;
  probe->add_option("--q", probe_q);
  probe->add_option("--tau", probe_tau);
  probe->add_option("--depth", depths, "one or more depths >= 2");
  probe->add_option("--k", probe_k);
  probe->add_option("--trials", probe_trials);
  probe->add_option("--seed", seed);
  probe->add_option("--out", out_path);

  // min-k
  auto* mink = app.add_subcommand("min-k", "smallest sequence length reaching a success rate");
  int mink_q = 2, mink_h = 4;
  double mink_tau = 0.2, mink_target = 0.9;
  std::size_t mink_trials = 50, mink_cap = 1000000;
  mink->add_option("--q", mink_q);
  mink->add_option("--tau", mink_tau)->required();
  mink->add_option("--h", mink_h)->required();
  mink->add_option("--target", mink_target);
  mink->add_option("--trials", mink_trials);
  mink->add_option("--cap", mink_cap);
  mink->add_option("--seed", seed);
  mink->add_option("--out", out_path);

  // verify
  auto* verify = app.add_subcommand("verify", "oracle and invariant checks");
  bool full = false;
  std::vector<int> only;
  verify->add_flag("--full", full, "acceptance-size runs");
  verify->add_option("--only", only, "check ids 1-9");
  verify->add_option("--seed", seed);

  // compare
  auto* cmp = app.add_subcommand("compare", "compare two topologies (exit 0 equal, 4 different)");
  std::string first_path, second_path;
  cmp->add_option("first", first_path)->required();
  cmp->add_option("second", second_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*gen) {
      const std::uint64_t s = resolve_seed(seed);
      Rng rng = make_rng(s);
      const Phylogeny phy = random_homogeneous_phylogeny(gen_h, gen_f, gen_g, rng);
      Output out(out_path);
      Header{"gen-tree"}.add("h", gen_h).add("f", gen_f).add("g", gen_g).add("seed", s).write(out.stream());
      out.stream() << to_newick(phy) << '\n';
      return 0;
    }

    if (*sim) {
      const std::uint64_t s = resolve_seed(seed);
      Rng rng = make_rng(s);
      std::istringstream tree_in(read_text(tree_path));
      const Phylogeny phy = parse_phylogeny(read_newick_line(tree_in));
      if (!*q_opt && !*model_opt) throw InvalidParameter("give --q or --model");
      const RateModel model = *q_opt ? RateModel::potts(sim_q) : read_rate_model_file(model_path);
      const auto kind = sampler == "cluster" ? SamplerKind::kRandomCluster : SamplerKind::kBroadcast;
      const SampledData data = sample_alignment(phy, model, sim_k, rng, kind, keep_internal);
      Output out(out_path);
      Header h{"simulate"};
      h.add("tree", tree_path).add("model", *q_opt ? "potts q=" + std::to_string(sim_q) : model_path);
      h.add("k", sim_k).add("sampler", sampler).add("seed", s).write(out.stream());
      write_alignment(out.stream(), data.hidden ? with_hidden_rows(data) : data.leaves);
      return 0;
    }

    if (*rec) {
      const std::uint64_t s = resolve_seed(seed);
      Rng rng = make_rng(s);
      std::istringstream aln_in(read_text(aln_path));
      const Alignment aln = read_alignment(aln_in).leaves_only();
      const int n = static_cast<int>(aln.rows());
      if (n < 2 || (n & (n - 1)) != 0) throw InvalidParameter("need 2^h leaves labeled 1..n");
      const int levels = std::countr_zero(static_cast<unsigned>(n));
      const double f = rec_f > 0.0 ? rec_f : rec_g;
      std::optional<RootEstimator> chosen;
      if (estimator != "auto") chosen = parse_root_estimator(estimator);
      ReconstructParams params = default_params(aln.q(), f, rec_g, levels, aln.sites(), rng, 40000, chosen, rec_l);
      params.f_min = rec_f_min > 0.0 ? rec_f_min : f;
      if (!rec_D.empty()) {
        params.D = rec_D;
        params.W = rec_W;
      } else if (rec_W != params.W) {
        // Keep the gate D + ln(W/4) in place under a different W.
        for (double& d : params.D) d += std::log(params.W / 4.0) - std::log(rec_W / 4.0);
        params.W = rec_W;
      }
      Header h{"reconstruct"};
      h.add("alignment", aln_path.empty() ? "-" : aln_path).add("q", aln.q()).add("k", aln.sites());
      h.add("f", f).add("g", rec_g).add("estimator", to_string(params.estimator)).add("l", params.l);
      h.add("D", join(params.D)).add("W", params.W).add("f_min", params.f_min).add("seed", s);
      try {
        const ReconstructionResult result = reconstruct_homogeneous(aln, params, rng);
        Output out(out_path);
        h.write(out.stream());
        out.stream() << to_newick(result.topology) << '\n';
        return 0;
      } catch (const ReconstructionFailure& e) {
        std::cerr << "reconstruction failed: " << e.what() << '\n';
        if (!failure_path.empty()) write_failure_record(failure_path, e);
        return kReconstructionFailed;
      }
    }

    if (*asr) {
      const std::uint64_t s = resolve_seed(seed);
      SweepConfig cfg;
      cfg.kind = SweepKind::kAsr;
      cfg.q = {asr_q};
      cfg.tau = {asr_tau};
      cfg.h = {asr_h};
      if (asr_l > 0) cfg.l = {asr_l};
      cfg.trials = asr_trials;
      cfg.estimator = asr_estimator;
      cfg.seed = s;
      cfg.output = out_path;
      asr_accuracy_sweep(cfg);
      return 0;
    }

    if (*sweep) {
      SweepConfig cfg = read_sweep_config_file(config_path);
      if (seed) cfg.seed = *seed;
      if (jobs > 0) cfg.jobs = jobs;
      if (!out_path.empty()) cfg.output = out_path;
      if (cfg.kind == SweepKind::kPtr) {
        ptr_success_sweep(cfg);
      } else {
        asr_accuracy_sweep(cfg);
      }
      return 0;
    }

    if (*probe) {
      const std::uint64_t s = resolve_seed(seed);
      Rng rng = make_rng(s);
      Output out(out_path);
      Header{"probe"}.add("q", probe_q).add("tau", probe_tau).add("k", probe_k).add("trials", probe_trials)
          .add("seed", s).write(out.stream());
      out.stream() << "depth,n,exact,tv,affinity,success_lower,success_upper,success,trials\n";
      for (int depth : depths) {
        const ProbeResult r = distinguishability_probe(probe_q, probe_tau, depth, probe_k, probe_trials, rng);
        out.stream() << depth << ',' << (1 << depth) << ',' << (r.exact ? 1 : 0) << ',' << r.tv << ','
                     << r.affinity << ',' << r.success_lower << ',' << r.success_upper << ',' << r.success << ','
                     << r.trials << '\n';
      }
      return 0;
    }

    if (*mink) {
      const std::uint64_t s = resolve_seed(seed);
      Rng rng = make_rng(s);
      const MinKResult r = find_min_k(mink_q, mink_tau, mink_h, mink_target, rng, mink_trials, mink_cap);
      Output out(out_path);
      Header{"min-k"}.add("q", mink_q).add("tau", mink_tau).add("h", mink_h).add("target", mink_target)
          .add("trials", mink_trials).add("cap", mink_cap).add("seed", s).write(out.stream());
      out.stream() << "# k*=" << r.k << (r.censored ? " (censored at cap)" : "") << '\n' << "k,rate\n";
      for (const auto& [k, rate] : r.curve) out.stream() << k << ',' << rate << '\n';
      return 0;
    }

    if (*verify) {
      const std::uint64_t s = resolve_seed(seed);
      std::cout << "# ksb " << kVersion << " verify\n# seed=" << s << "\n# scale=" << (full ? "full" : "quick")
                << '\n';
      int failures = 0;
      for (int id = 1; id <= 9; ++id) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        for (const auto& r : run_checks(full ? CheckScale::kFull : CheckScale::kQuick, s, {id})) {
          std::cout << format_check(r) << std::endl;
          failures += !r.passed;
        }
      }
      return failures == 0 ? 0 : kVerificationFailed;
    }

    if (*cmp) {
      const TopologyComparison c = compare_topologies(read_topology(first_path), read_topology(second_path));
      std::cout << (c.equal ? "equal" : "different") << " rf=" << c.robinson_foulds << '\n';
      return c.equal ? 0 : kTopologiesDiffer;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
