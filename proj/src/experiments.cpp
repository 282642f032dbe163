#include "ksb/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ksb/version.hpp"

namespace ksb {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T value{};
    if constexpr (std::is_same_v<T, double>) {
      value = std::stod(text, &used);
    } else if constexpr (std::is_same_v<T, int>) {
      value = std::stoi(text, &used);
    } else {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      value = static_cast<T>(std::stoull(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::logic_error&) {
    throw InvalidParameter("bad value for " + key + ": " + text);
  }
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(parse_number<T>(key, item));
  return out;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, x);
  return buf;
}

std::vector<std::string> header_comments(const SweepConfig& cfg) {
  std::vector<std::string> lines{std::string("ksb ") + kVersion + " sweep"};
  std::stringstream ss(cfg.to_text());
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

std::unique_ptr<CsvAppender> open_appender(const SweepConfig& cfg) {
  const auto comments = header_comments(cfg);
  if (cfg.output.empty() || cfg.output == "-") {
    return std::make_unique<CsvAppender>(std::cout, comments, csv_header(cfg.kind));
  }
  return std::make_unique<CsvAppender>(cfg.output, comments, csv_header(cfg.kind));
}

// Runs job(i) for i in [0, count) on `jobs` threads.
template <class Job>
void run_pool(std::size_t count, int jobs, Job job) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

double binomial_stderr(double p, std::size_t n) {
  return n == 0 ? 0.0 : std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace

void SweepConfig::validate() const {
  if (q.empty() || tau.empty() || h.empty()) throw InvalidParameter("grids q, tau and h must be non-empty");
  for (int x : q) {
    if (x < 2 || x > kMaxStates) throw InvalidParameter("q values must be in [2, 256]");
  }
  for (double x : tau) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidParameter("tau values must be finite and >= 0");
  }
  for (int x : h) {
    if (x < 1 || x > 20) throw InvalidParameter("h values must be in [1, 20]");
  }
  for (int x : l) {
    if (x < 1) throw InvalidParameter("l values must be >= 1");
  }
  if (kind == SweepKind::kPtr) {
    if (k.empty()) throw InvalidParameter("grid k must be non-empty");
    for (std::size_t x : k) {
      if (x < 1) throw InvalidParameter("k values must be >= 1");
    }
    if (estimator != "auto" && estimator != "diluted" && estimator != "majority") {
      throw InvalidParameter("ptr estimator must be auto, diluted or majority");
    }
  } else if (estimator != "all" && estimator != "auto") {
    for (const auto& name : split_list(estimator)) parse_root_estimator(name);
  }
  if (!(f_fraction > 0.0) || f_fraction > 1.0) throw InvalidParameter("f_fraction must be in (0, 1]");
  if (trials < 1) throw InvalidParameter("trials must be >= 1");
  if (jobs < 1) throw InvalidParameter("jobs must be >= 1");
}

std::string SweepConfig::to_text() const {
  std::ostringstream out;
  out << "kind=" << (kind == SweepKind::kPtr ? "ptr" : "asr") << '\n'
      << "q=" << join(q) << '\n'
      << "tau=" << join(tau) << '\n'
      << "f_fraction=" << f_fraction << '\n'
      << "h=" << join(h) << '\n';
  if (kind == SweepKind::kPtr) out << "k=" << join(k) << '\n';
  out << "l=" << (l.empty() ? "calibrated" : join(l)) << '\n'
      << "trials=" << trials << '\n'
      << "seed=" << seed << '\n'
      << "estimator=" << estimator << '\n'
      << "jobs=" << jobs << '\n';
  return out.str();
}

void set_sweep_option(SweepConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(raw_value);
  if (key == "kind") {
    if (value == "ptr") {
      cfg.kind = SweepKind::kPtr;
    } else if (value == "asr") {
      cfg.kind = SweepKind::kAsr;
    } else {
      throw InvalidParameter("kind must be ptr or asr");
    }
  } else if (key == "q") {
    cfg.q = parse_list<int>(key, value);
  } else if (key == "tau" || key == "g") {
    cfg.tau = parse_list<double>(key, value);
  } else if (key == "f_fraction") {
    cfg.f_fraction = parse_number<double>(key, value);
  } else if (key == "h") {
    cfg.h = parse_list<int>(key, value);
  } else if (key == "k") {
    cfg.k = parse_list<std::size_t>(key, value);
  } else if (key == "l") {
    cfg.l = value == "calibrated" ? std::vector<int>{} : parse_list<int>(key, value);
  } else if (key == "trials") {
    cfg.trials = parse_number<std::size_t>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "estimator") {
    cfg.estimator = value;
  } else if (key == "output") {
    cfg.output = value;
  } else if (key == "jobs") {
    cfg.jobs = parse_number<int>(key, value);
  } else {
    throw InvalidParameter("unknown sweep setting: " + key);
  }
}

SweepConfig parse_sweep_config(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  SweepConfig cfg;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("sweep config: ") + e.what(), e.byte);
    }
    for (const auto& [key, value] : doc.items()) {
      std::string flat;
      if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) {
          flat += (i ? "," : "") + (value[i].is_string() ? value[i].get<std::string>() : value[i].dump());
        }
      } else {
        flat = value.is_string() ? value.get<std::string>() : value.dump();
      }
      set_sweep_option(cfg, key, flat);
    }
  } else {
    std::stringstream ss(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(ss, line)) {
      ++number;
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("expected key=value", number);
      set_sweep_option(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
  }
  cfg.validate();
  return cfg;
}

SweepConfig read_sweep_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open " + path.string());
  return parse_sweep_config(in);
}

std::string csv_header(SweepKind kind) {
  return kind == SweepKind::kPtr ? "q,tau,h,n,k,trials,successes,rate,stderr,runtime"
                                 : "estimator,q,tau,h,l,trials,accuracy,stderr";
}

std::string to_csv(const PtrRow& r) {
  std::ostringstream out;
  out << r.q << ',' << fmt("%.9g", r.tau) << ',' << r.h << ',' << r.n << ',' << r.k << ',' << r.trials << ','
      << r.successes << ',' << fmt("%.6f", r.rate) << ',' << fmt("%.6f", r.stderr_rate) << ','
      << fmt("%.3f", r.runtime);
  return out.str();
}

std::string to_csv(const AsrRow& r) {
  std::ostringstream out;
  out << r.estimator << ',' << r.q << ',' << fmt("%.9g", r.tau) << ',' << r.h << ',' << r.l << ',' << r.trials
      << ',' << fmt("%.6f", r.accuracy) << ',' << fmt("%.6f", r.stderr_accuracy);
  return out.str();
}

int default_dilution_step(int q, double g, int h, Rng& rng) {
  if (!(g >= 0.0) || g >= std::log(2.0)) return 1;
  try {
    return calibrate_dilution(q, g, std::clamp(h, 1, 20), rng).l;
  } catch (const CalibrationFailure& e) {
    const auto& table = e.table();
    return std::max_element(table.begin(), table.end(), [](const auto& x, const auto& y) {
             return x.epsilon - x.false_positive < y.epsilon - y.false_positive;
           })->l;
  }
}

PtrRow run_ptr_cell(int q, double g, double f_fraction, int h, std::size_t k, std::size_t trials,
                    const std::string& estimator, int l, Rng& rng) {
  if (h < 1 || k < 1 || trials < 1) throw InvalidParameter("need h >= 1, k >= 1 and trials >= 1");
  const auto start = std::chrono::steady_clock::now();
  const RateModel model = RateModel::potts(q);
  const double f = f_fraction * g;
  ReconstructParams params;
  if (g > 0.0) {
    std::optional<RootEstimator> chosen;
    if (estimator != "auto") chosen = parse_root_estimator(estimator);
    params = default_params(q, f, g, h, k, rng, 40000, chosen, l);
  }
  PtrRow row;
  row.q = q;
  row.tau = g;
  row.h = h;
  row.n = 1 << h;
  row.k = k;
  row.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const Phylogeny phy = g > 0.0 ? random_homogeneous_phylogeny(h, f, g, rng) : Phylogeny::uniform(h, 0.0);
    const SampledData data = sample_alignment(phy, model, k, rng);
    try {
      const auto result = reconstruct_homogeneous(data.leaves, params, rng);
      row.successes += topologies_equal(result.topology, unroot(phy));
    } catch (const ReconstructionFailure&) {
    }
  }
  row.rate = static_cast<double>(row.successes) / static_cast<double>(trials);
  row.stderr_rate = binomial_stderr(row.rate, trials);
  row.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

AsrRow run_asr_cell(RootEstimator estimator, int q, double tau, int h, int l, std::size_t trials, Rng& rng) {
  const auto channel = estimate_error_channel(Phylogeny::uniform(h, tau), q, std::max(l, 1), trials, rng, estimator);
  AsrRow row;
  row.estimator = std::string(to_string(estimator));
  row.q = q;
  row.tau = tau;
  row.h = h;
  row.l = estimator == RootEstimator::kDiluted ? l : 0;
  row.trials = trials;
  row.accuracy = channel.mean_diagonal;
  row.stderr_accuracy = channel.diagonal_stderr;
  return row;
}

CsvAppender::CsvAppender(std::ostream& out, const std::vector<std::string>& comments, const std::string& header)
    : out_(&out) {
  for (const auto& c : comments) *out_ << "# " << c << '\n';
  *out_ << header << '\n';
  out_->flush();
}

CsvAppender::CsvAppender(const std::filesystem::path& path, const std::vector<std::string>& comments,
                         const std::string& header) {
  bool fresh = true;
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
    std::ifstream in(path);
    std::string line;
    bool seen_header = false;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (!seen_header) {
        if (line != header) throw InvalidParameter(path.string() + " has a different CSV header");
        seen_header = true;
        continue;
      }
      done_.insert(line + ",");
    }
    fresh = !seen_header;
  }
  owned_ = std::make_unique<std::ofstream>(path, std::ios::app);
  if (!*owned_) throw InvalidParameter("cannot write " + path.string());
  out_ = owned_.get();
  if (fresh) {
    for (const auto& c : comments) *out_ << "# " << c << '\n';
    *out_ << header << '\n';
  } else {
    *out_ << "# resumed\n";
  }
  out_->flush();
}

CsvAppender::~CsvAppender() = default;

// Stored rows carry a trailing comma, so a key ending in ',' matches whole
// fields only.
bool CsvAppender::has(const std::string& key) const {
  const auto it = done_.lower_bound(key);
  return it != done_.end() && it->compare(0, key.size(), key) == 0;
}

void CsvAppender::append(const std::string& line) {
  std::lock_guard lock(mutex_);
  *out_ << line << '\n';
  out_->flush();
}

std::string csv_key(const std::string& line, int columns) {
  std::size_t pos = 0;
  for (int c = 0; c < columns; ++c) {
    pos = line.find(',', pos);
    if (pos == std::string::npos) return line + ",";
    ++pos;
  }
  return line.substr(0, pos);
}


std::vector<PtrRow> ptr_success_sweep(const SweepConfig& cfg) {
  cfg.validate();
  if (cfg.kind != SweepKind::kPtr) throw InvalidParameter("not a ptr sweep config");
  struct Cell {
    int q;
    double tau;
    int h;
    std::size_t k;
    int l;
  };
  std::vector<Cell> cells;
  const std::vector<int> ls = cfg.l.empty() ? std::vector<int>{0} : cfg.l;
  for (int q : cfg.q)
    for (double tau : cfg.tau)
      for (int h : cfg.h)
        for (std::size_t k : cfg.k)
          for (int l : ls) cells.push_back({q, tau, h, k, l});

  auto out = open_appender(cfg);
  std::vector<std::optional<PtrRow>> rows(cells.size());
  run_pool(cells.size(), cfg.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    PtrRow probe;
    probe.q = c.q;
    probe.tau = c.tau;
    probe.h = c.h;
    probe.n = 1 << c.h;
    probe.k = c.k;
    if (out->has(csv_key(to_csv(probe), 5))) return;
    Rng rng = make_rng(derive_seed(cfg.seed, i));
    PtrRow row = run_ptr_cell(c.q, c.tau, cfg.f_fraction, c.h, c.k, cfg.trials, cfg.estimator, c.l, rng);
    out->append(to_csv(row));
    rows[i] = row;
  });
  std::vector<PtrRow> result;
  for (auto& r : rows) {
    if (r) result.push_back(*r);
  }
  return result;
}

std::vector<AsrRow> asr_accuracy_sweep(const SweepConfig& cfg) {
  cfg.validate();
  if (cfg.kind != SweepKind::kAsr) throw InvalidParameter("not an asr sweep config");
  std::vector<RootEstimator> estimators;
  if (cfg.estimator == "all" || cfg.estimator == "auto") {
    estimators = {RootEstimator::kDiluted, RootEstimator::kMajority, RootEstimator::kPosterior};
  } else {
    for (const auto& name : split_list(cfg.estimator)) estimators.push_back(parse_root_estimator(name));
  }
  struct Cell {
    std::optional<RootEstimator> estimator;  // empty: uniform-guess baseline
    int q;
    double tau;
    int h;
    int l;  // 0: calibrated (diluted) or unused
  };
  std::vector<Cell> cells;
  for (int q : cfg.q) {
    for (double tau : cfg.tau) {
      for (int h : cfg.h) {
        for (RootEstimator e : estimators) {
          if (e == RootEstimator::kDiluted && !cfg.l.empty()) {
            for (int l : cfg.l) cells.push_back({e, q, tau, h, l});
          } else {
            cells.push_back({e, q, tau, h, 0});
          }
        }
        cells.push_back({std::nullopt, q, tau, h, 0});
      }
    }
  }

  auto out = open_appender(cfg);
  std::vector<std::optional<AsrRow>> rows(cells.size());
  run_pool(cells.size(), cfg.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    AsrRow key;
    key.estimator = c.estimator ? std::string(to_string(*c.estimator)) : "uniform";
    key.q = c.q;
    key.tau = c.tau;
    key.h = c.h;
    key.l = c.l;
    // A calibrated step is only known after the run, so match without it.
    const bool key_has_l = c.estimator == RootEstimator::kDiluted && c.l > 0;
    if (out->has(csv_key(to_csv(key), key_has_l ? 5 : 4))) return;
    AsrRow row;
    if (!c.estimator) {
      row = key;
      row.trials = cfg.trials;
      row.accuracy = 1.0 / c.q;
      row.stderr_accuracy = 0.0;
    } else {
      Rng rng = make_rng(derive_seed(cfg.seed, i));
      int l = c.l;
      if (*c.estimator == RootEstimator::kDiluted && l <= 0) l = default_dilution_step(c.q, c.tau, c.h, rng);
      row = run_asr_cell(*c.estimator, c.q, c.tau, c.h, l, cfg.trials, rng);
    }
    out->append(to_csv(row));
    rows[i] = row;
  });
  std::vector<AsrRow> result;
  for (auto& r : rows) {
    if (r) result.push_back(*r);
  }
  return result;
}

TrendResult bootstrap_trend(const std::vector<std::size_t>& successes, const std::vector<std::size_t>& trials,
                            std::size_t replicates, double confidence, Rng& rng) {
  const std::size_t cells = successes.size();
  if (cells < 2 || trials.size() != cells) throw InvalidParameter("need at least two cells with matching trials");
  if (replicates < 1 || !(confidence > 0.0 && confidence < 1.0)) {
    throw InvalidParameter("need replicates >= 1 and confidence in (0, 1)");
  }
  std::vector<double> p(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    if (trials[i] == 0 || successes[i] > trials[i]) throw InvalidParameter("invalid success count");
    p[i] = static_cast<double>(successes[i]) / static_cast<double>(trials[i]);
  }
  auto kendall = [cells](const std::vector<double>& x) {
    int s = 0;
    for (std::size_t i = 0; i < cells; ++i) {
      for (std::size_t j = i + 1; j < cells; ++j) s += (x[j] > x[i]) - (x[j] < x[i]);
    }
    return s;
  };
  TrendResult result;
  result.statistic = kendall(p);
  std::vector<std::vector<double>> draws(cells, std::vector<double>(replicates));
  std::vector<double> x(cells);
  std::size_t down = 0, up = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    for (std::size_t i = 0; i < cells; ++i) {
      std::binomial_distribution<std::size_t> redraw(trials[i], p[i]);
      x[i] = static_cast<double>(redraw(rng)) / static_cast<double>(trials[i]);
      draws[i][r] = x[i];
    }
    const int s = kendall(x);
    down += s < 0;
    up += s > 0;
  }
  for (auto& d : draws) {
    std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
    result.medians.push_back(d[d.size() / 2]);
  }
  result.fraction_decreasing = static_cast<double>(down) / static_cast<double>(replicates);
  result.fraction_increasing = static_cast<double>(up) / static_cast<double>(replicates);
  result.decay = result.fraction_decreasing >= confidence;
  result.growth = result.fraction_increasing >= confidence;
  return result;
}

std::pair<Phylogeny, Phylogeny> quartet_swap_pair(int levels, double tau) {
  if (levels < 2) throw InvalidParameter("a quartet swap needs at least 2 levels");
  const Phylogeny a = Phylogeny::uniform(levels, tau);
  const int n = a.leaf_count();
  const int quarter = n / 4;
  std::vector<int> labels = a.leaf_labels();
  std::swap_ranges(labels.begin() + quarter, labels.begin() + 2 * quarter, labels.begin() + 2 * quarter);
  return {a, Phylogeny(levels, a.edge_lengths(), std::move(labels))};
}

ProbeResult exact_distinguishability(const Phylogeny& a, const Phylogeny& b, const RateModel& model,
                                     std::size_t k, std::size_t trials, Rng& rng) {
  if (a.leaf_count() != b.leaf_count()) throw InvalidParameter("trees have different leaf counts");
  if (k < 1) throw InvalidParameter("need k >= 1");
  const std::vector<double> pa = exact_leaf_distribution(a, model);
  const std::vector<double> pb = exact_leaf_distribution(b, model);
  ProbeResult r;
  r.exact = true;
  r.trials = trials;
  double tv = 0.0, affinity = 0.0;
  std::vector<double> log_ratio(pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    tv += std::abs(pa[i] - pb[i]);
    affinity += std::sqrt(pa[i] * pb[i]);
    if (pa[i] == pb[i]) {
      log_ratio[i] = 0.0;
    } else if (pb[i] == 0.0) {
      log_ratio[i] = kInfinity;
    } else if (pa[i] == 0.0) {
      log_ratio[i] = -kInfinity;
    } else {
      log_ratio[i] = std::log(pa[i]) - std::log(pb[i]);
    }
  }
  r.tv = std::min(1.0, 0.5 * tv);
  r.affinity = std::min(1.0, affinity);
  const double kk = static_cast<double>(k);
  r.success_lower = 0.5 * (1.0 + std::max(r.tv, 1.0 - std::pow(r.affinity, kk)));
  r.success_upper = 0.5 * (1.0 + std::sqrt(std::max(0.0, 1.0 - std::pow(r.affinity, 2.0 * kk))));
  if (trials == 0) {
    r.success = 0.5 * (r.success_lower + r.success_upper);
    return r;
  }
  std::discrete_distribution<std::size_t> draw_a(pa.begin(), pa.end());
  std::discrete_distribution<std::size_t> draw_b(pb.begin(), pb.end());
  std::bernoulli_distribution coin(0.5);
  double score = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const bool from_a = coin(rng);
    double sum = 0.0;
    for (std::size_t s = 0; s < k; ++s) sum += log_ratio[from_a ? draw_a(rng) : draw_b(rng)];
    if (sum == 0.0) {
      score += 0.5;
    } else {
      score += (sum > 0.0) == from_a;
    }
  }
  r.success = score / static_cast<double>(trials);
  return r;
}

ProbeResult sampled_distinguishability(const Phylogeny& a, const Phylogeny& b, int q, std::size_t k,
                                       std::size_t trials, const ReconstructParams& params, Rng& rng) {
  if (trials < 1) throw InvalidParameter("need at least one trial");
  const RateModel model = RateModel::potts(q);
  const Topology ta = unroot(a), tb = unroot(b);
  std::bernoulli_distribution coin(0.5);
  double score = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const bool from_a = coin(rng);
    const SampledData data = sample_alignment(from_a ? a : b, model, k, rng);
    try {
      const Topology out = reconstruct_homogeneous(data.leaves, params, rng).topology;
      const bool is_a = topologies_equal(out, ta), is_b = topologies_equal(out, tb);
      score += is_a == is_b ? 0.5 : (is_a == from_a ? 1.0 : 0.0);
    } catch (const ReconstructionFailure&) {
      score += 0.5;
    }
  }
  ProbeResult r;
  r.trials = trials;
  r.success = score / static_cast<double>(trials);
  r.success_lower = 0.0;
  r.success_upper = 1.0;
  r.tv = std::nan("");
  r.affinity = std::nan("");
  return r;
}

ProbeResult distinguishability_probe(int q, double tau, int depth, std::size_t k, std::size_t trials, Rng& rng) {
  const auto [a, b] = quartet_swap_pair(depth, tau);
  if (std::pow(static_cast<double>(q), a.leaf_count()) <= 1e6) {
    return exact_distinguishability(a, b, RateModel::potts(q), k, trials, rng);
  }
  const ReconstructParams params = default_params(q, tau, tau, depth, k, rng);
  return sampled_distinguishability(a, b, q, k, trials, params, rng);
}

MinKResult find_min_k(int q, double tau, int h, double target_rate, Rng& rng, std::size_t trials,
                      std::size_t cap, double tolerance) {
  if (!(target_rate > 0.0 && target_rate < 1.0)) throw InvalidParameter("target rate must be in (0, 1)");
  if (cap < 1 || !(tolerance >= 0.0)) throw InvalidParameter("need cap >= 1 and tolerance >= 0");
  MinKResult result;
  auto rate = [&](std::size_t k) {
    Rng cell = split(rng);
    const double r = run_ptr_cell(q, tau, 1.0, h, k, trials, "auto", 0, cell).rate;
    result.curve.emplace_back(k, r);
    return r;
  };
  std::size_t lo = 0, hi = 1;
  while (rate(hi) < target_rate) {
    if (hi >= cap) {
      result.k = cap;
      result.censored = true;
      return result;
    }
    lo = hi;
    hi = std::min(cap, 2 * hi);
  }
  while (hi - lo > std::max<std::size_t>(1, static_cast<std::size_t>(tolerance * static_cast<double>(hi)))) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (rate(mid) >= target_rate) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  result.k = hi;
  return result;
}

}  // namespace ksb
