#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ksb/asr.hpp"
#include "ksb/reconstruct.hpp"
#include "ksb/rng.hpp"

namespace ksb {

enum class SweepKind { kPtr, kAsr };

struct SweepConfig {
  SweepKind kind = SweepKind::kPtr;
  std::vector<int> q{2};
  std::vector<double> tau{0.2};  // largest branch length g
  double f_fraction = 1.0;       // edge lengths drawn uniformly from [f_fraction * g, g]
  std::vector<int> h{5};
  std::vector<std::size_t> k{1000};  // sequence lengths (ptr sweeps)
  std::vector<int> l;                // dilution steps; empty means calibrated
  std::size_t trials = 50;
  std::uint64_t seed = 1;
  // ptr: auto, diluted or majority. asr: comma-separated list or `all`.
  std::string estimator = "auto";
  std::string output;  // empty or "-" writes to stdout
  int jobs = 1;

  void validate() const;
  // Key=value lines, one per setting, lists comma-separated.
  std::string to_text() const;
};

// JSON object or key=value lines (`#` comments), detected from the first
// non-blank character. Keys mirror the field names.
SweepConfig parse_sweep_config(std::istream& in);
SweepConfig read_sweep_config_file(const std::filesystem::path& path);
// Applies one key=value setting.
void set_sweep_option(SweepConfig& cfg, const std::string& key, const std::string& value);

struct PtrRow {
  int q = 0;
  double tau = 0.0;
  int h = 0;
  int n = 0;
  std::size_t k = 0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double rate = 0.0;
  double stderr_rate = 0.0;
  double runtime = 0.0;  // seconds
};

struct AsrRow {
  std::string estimator;
  int q = 0;
  double tau = 0.0;
  int h = 0;
  int l = 0;
  std::size_t trials = 0;
  double accuracy = 0.0;
  double stderr_accuracy = 0.0;
};

std::string csv_header(SweepKind kind);
std::string to_csv(const PtrRow& row);
std::string to_csv(const AsrRow& row);

// Reconstruction success over `trials` random phylogenies with edges in
// [f_fraction * g, g]. `estimator` is auto, diluted or majority; `l` <= 0
// calibrates. g == 0 uses default parameters on the degenerate tree.
PtrRow run_ptr_cell(int q, double g, double f_fraction, int h, std::size_t k, std::size_t trials,
                    const std::string& estimator, int l, Rng& rng);

// Root accuracy of one estimator on the homogeneous tree of height h.
AsrRow run_asr_cell(RootEstimator estimator, int q, double tau, int h, int l, std::size_t trials, Rng& rng);

// Dilution step used when none is given: calibrated at depth h, or the widest
// margin row when no step passes; 1 when g is out of the calibration range.
int default_dilution_step(int q, double g, int h, Rng& rng);

// Appends CSV rows through one writer. An existing file is resumed: has()
// reports rows already present whose leading fields equal a key from
// csv_key().
class CsvAppender {
 public:
  CsvAppender(std::ostream& out, const std::vector<std::string>& comments, const std::string& header);
  CsvAppender(const std::filesystem::path& path, const std::vector<std::string>& comments,
              const std::string& header);
  ~CsvAppender();
  CsvAppender(const CsvAppender&) = delete;
  CsvAppender& operator=(const CsvAppender&) = delete;

  bool has(const std::string& key) const;
  std::size_t resumed() const { return done_.size(); }
  void append(const std::string& line);

 private:
  std::ostream* out_;
  std::unique_ptr<std::ostream> owned_;
  std::set<std::string> done_;
  std::mutex mutex_;
};

// Leading `columns` comma-separated fields of a CSV line, with the trailing
// comma.
std::string csv_key(const std::string& line, int columns);

// Sweeps write to cfg.output and return the rows computed in this run, in
// cell order. Cell i draws from derive_seed(cfg.seed, i).
std::vector<PtrRow> ptr_success_sweep(const SweepConfig& cfg);
std::vector<AsrRow> asr_accuracy_sweep(const SweepConfig& cfg);

// Bootstrap test for a monotone trend in success proportions across ordered
// cells (e.g. depths). Each replicate redraws every count binomially and
// computes the Mann-Kendall statistic S; decay is declared when S < 0 in at
// least `confidence` of the replicates, growth when S > 0 likewise.
struct TrendResult {
  std::vector<double> medians;  // bootstrap median proportion per cell
  int statistic = 0;            // S on the observed proportions
  double fraction_decreasing = 0.0;
  double fraction_increasing = 0.0;
  bool decay = false;
  bool growth = false;
};
TrendResult bootstrap_trend(const std::vector<std::size_t>& successes, const std::vector<std::size_t>& trials,
                            std::size_t replicates, double confidence, Rng& rng);

// Two homogeneous trees of the given depth with all edges tau: leaf labels in
// order, and the same with the second and third quarter blocks exchanged, so
// the top quartets differ (AB|CD against AC|BD).
std::pair<Phylogeny, Phylogeny> quartet_swap_pair(int levels, double tau);

struct ProbeResult {
  bool exact = false;
  double tv = 0.0;            // single-sample total variation (exact only)
  double affinity = 1.0;      // sum sqrt(p1 p2) (exact only)
  double success_lower = 0.5; // k-sample Bayes success bounds from the affinity
  double success_upper = 0.5;
  double success = 0.5;       // Monte Carlo success of the test
  std::size_t trials = 0;
};

// Exact leaf laws of both trees; the k-sample likelihood-ratio test is
// simulated `trials` times (ties count 1/2). InstanceTooLarge past q^n = 1e6.
ProbeResult exact_distinguishability(const Phylogeny& a, const Phylogeny& b, const RateModel& model,
                                     std::size_t k, std::size_t trials, Rng& rng);

// Data from a or b at random; the reconstruction pipeline decides. Output
// equal to neither tree or a failed run counts 1/2.
ProbeResult sampled_distinguishability(const Phylogeny& a, const Phylogeny& b, int q, std::size_t k,
                                       std::size_t trials, const ReconstructParams& params, Rng& rng);

// Quartet-swap pair at the given depth; exact when q^n <= 1e6.
ProbeResult distinguishability_probe(int q, double tau, int depth, std::size_t k, std::size_t trials, Rng& rng);

struct MinKResult {
  std::size_t k = 0;      // smallest k found, or the cap when censored
  bool censored = false;
  std::vector<std::pair<std::size_t, double>> curve;  // (k, rate) in evaluation order
};

// Doubling from k = 1 until the rate reaches target, then bisection down to
// a relative resolution `tolerance`. Censored when the cap is passed.
MinKResult find_min_k(int q, double tau, int h, double target_rate, Rng& rng, std::size_t trials = 50,
                      std::size_t cap = 1000000, double tolerance = 0.05);

}  // namespace ksb
