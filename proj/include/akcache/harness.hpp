#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "akcache/cache.hpp"
#include "akcache/model.hpp"
#include "akcache/simcache.hpp"
#include "akcache/workload.hpp"

namespace akcache::harness {

enum class Paradigm { Exact, ApproxKey, Similarity };

std::string to_string(Paradigm p);

struct CacheSetup {
  std::string name;
  Paradigm paradigm = Paradigm::ApproxKey;
  CacheConfig cache;      // Exact and ApproxKey; Exact forces identity approx
  SimilarityConfig sim;   // Similarity
};

struct TraceSource {
  std::optional<WorkloadSpec> workload;
  std::string path;  // used when workload is not set
  TraceFormat format = TraceFormat::Csv;
};

struct ExperimentConfig {
  TraceSource source;
  std::vector<CacheSetup> caches;
  double warmup_fraction = 0.1;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  bool collect_per_key = true;
  bool model_validation = false;
  std::string output_dir = ".";
};

struct PerKeyStats {
  std::uint64_t arrivals = 0;
  std::uint64_t hits = 0;
  std::uint64_t oracle_calls = 0;
  std::uint64_t errors = 0;
};

struct MetricsReport {
  // setup echo for the fixed CSV columns
  std::string cache_name;
  std::string paradigm;
  std::string approx;
  std::size_t capacity = 0;
  double beta = 0.0;
  std::string mode;
  std::uint64_t seed = 0;
  bool error_control = false;

  // counts over the post-warmup window
  std::uint64_t arrivals = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t refreshes = 0;  // oracle calls on hits
  std::uint64_t oracle_calls = 0;
  std::uint64_t errors = 0;

  double hit_rate = 0.0;
  double refresh_rate = 0.0;
  double error_rate = 0.0;
  double inference_fraction = 0.0;
  // equals error_rate when error control is off (the measured no-control
  // error); unset otherwise
  std::optional<double> e_nc;

  std::map<std::int64_t, PerKeyStats> per_key;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> sequence_lengths;

  // sampled wall-clock per-lookup time
  double lookup_p50_us = 0.0;
  double lookup_p99_us = 0.0;
};

// Replays the trace once per (cache, seed) and reports metrics computed
// after the warmup prefix. Deterministic given source and config apart
// from the wall-clock fields.
std::vector<MetricsReport> simulate(const ExperimentConfig& config);

// Single replay; the stream factory must produce a fresh pass over the
// same records on every call (ideal replacement needs a ranking pre-pass).
class RecordStream {
 public:
  virtual ~RecordStream() = default;
  virtual const TraceRecord* next() = 0;  // nullptr at end of trace
  virtual std::uint64_t size() const = 0;
};

using StreamFactory = std::function<std::unique_ptr<RecordStream>()>;

MetricsReport simulate_one(const CacheSetup& setup, const StreamFactory& make,
                           double warmup_fraction, std::uint64_t seed,
                           bool collect_per_key);

// Mean and sample standard deviation across the per-seed reports of one
// cache setup.
struct MeanMetrics {
  double hit_rate = 0.0;
  double refresh_rate = 0.0;
  double error_rate = 0.0;
  double inference_fraction = 0.0;
  double hit_rate_std = 0.0;
  double refresh_rate_std = 0.0;
  double error_rate_std = 0.0;
};
MeanMetrics mean_metrics(const std::vector<MetricsReport>& runs);

struct ValidationRow {
  std::string metric;
  double sim = 0.0;
  double model = 0.0;
  double diff = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct MetricPair {
  std::string name;
  double sim = 0.0;
  double model = 0.0;
};

std::vector<ValidationRow> validate(const std::vector<MetricPair>& pairs,
                                    double tol_abs);

// Per-key comparison of measured inference/error fractions against model
// rates; the simulated key set must be exactly 0..rates.size()-1 (throws
// ConfigError on a mismatch).
std::vector<ValidationRow> validate_per_key(
    const std::map<std::int64_t, PerKeyStats>& sim,
    const std::vector<model::KeyRates>& rates, double tol_abs);

bool all_pass(const std::vector<ValidationRow>& rows);
void print_validation(std::ostream& os, const std::vector<ValidationRow>& rows);

struct BenchSetup {
  std::string name;
  Paradigm paradigm = Paradigm::Exact;
  ApproxFn approx = ApproxFn::identity();
  IndexKind index = IndexKind::LinearScan;
};

struct BenchRow {
  std::string paradigm;
  std::size_t capacity = 0;
  double median_us = 0.0;
  double p99_us = 0.0;
  double ratio_vs_exact = 0.0;
};

// Warm-lookup latency per paradigm and capacity: caches are pre-populated
// with K distinct flows and queried with stored keys only, single thread.
std::vector<BenchRow> bench_lookup(const std::vector<std::size_t>& k_values,
                                   const std::vector<BenchSetup>& paradigms,
                                   std::size_t queries, std::uint64_t seed);

struct AccuracyRow {
  std::string cache_name;
  double correct_hit_frac = 0.0;
  double error_hit_frac = 0.0;
  double miss_frac = 0.0;
};

// Hit quality breakdown of several cache setups over one replayed trace.
std::vector<AccuracyRow> compare_accuracy(const ExperimentConfig& config);

// Fixed columns: paradigm,approx,K,beta,mode,H,R,E,E_nc,inference_fraction,seed
void write_metrics_csv(std::ostream& os, const std::vector<MetricsReport>& rows);

}  // namespace akcache::harness
