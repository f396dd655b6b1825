#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "akcache/approx.hpp"
#include "akcache/cache.hpp"
#include "akcache/rng.hpp"

namespace akcache {

enum class PopularityKind { Zipf, Uniform, Explicit };

struct PopularitySpec {
  PopularityKind kind = PopularityKind::Uniform;
  double alpha = 1.0;            // Zipf exponent, >= 0
  std::vector<double> q;         // Explicit: non-increasing, sums to 1
};

enum class MixtureKind { SingleClass, Dominant, UniformClasses, Explicit };

struct MixtureSpec {
  MixtureKind kind = MixtureKind::SingleClass;
  double p_max = 1.0;                   // Dominant: modal class probability
  int m = 1;                            // classes per key
  std::vector<std::vector<double>> p;   // Explicit: one mixture per key
};

// Synthetic IRM workload: keys drawn i.i.d. from the popularity law, the
// label of each arrival drawn i.i.d. from the key's class mixture. Fully
// reproducible from the seed.
struct WorkloadSpec {
  std::size_t key_count = 1;
  PopularitySpec popularity;
  MixtureSpec mixture;
  int class_count = 1;
  std::uint64_t arrivals = 1;
  std::uint64_t seed = 1;
  // Trailing per-arrival noise elements appended to the key digits. With
  // the default 0 the input encodes the key index injectively, so identity
  // approximation maps each key to exactly one cache key; noise > 0 makes
  // raw inputs near-unique while prefix:4 still recovers the key index.
  int noise_elements = 0;
};

struct TraceRecord {
  std::int64_t flow_id = 0;
  std::int64_t key_index = -1;  // ground truth; -1 for ingested real traces
  InputVector input;
  ClassLabel true_label = 0;
};

class TraceGenerator {
 public:
  explicit TraceGenerator(const WorkloadSpec& spec);
  TraceGenerator(const WorkloadSpec& spec, std::uint64_t seed_override);

  // Returns a reference to an internal record reused across calls.
  const TraceRecord& next();

  bool done() const { return produced_ >= spec_.arrivals; }
  const WorkloadSpec& spec() const { return spec_; }

  // Resolved popularity law (non-increasing, normalized).
  const std::vector<double>& popularity() const { return q_; }
  // Resolved class mixture of one key, aligned with label_of().
  std::vector<double> mixture_of(std::size_t key) const;
  // Global label id of a key's class slot.
  ClassLabel label_of(std::size_t key, int slot) const;

 private:
  void validate() const;
  std::size_t sample_key();
  int sample_slot(std::size_t key);

  WorkloadSpec spec_;
  Rng rng_;
  std::vector<double> q_;
  std::vector<double> q_cdf_;
  std::vector<std::vector<double>> explicit_cdf_;
  TraceRecord rec_;
  std::uint64_t produced_ = 0;
};

enum class TraceFormat { Csv, JsonLines };

// Generates spec.arrivals records and writes them; byte-identical output
// for identical spec + seed.
void write_trace(const WorkloadSpec& spec, const std::string& path,
                 TraceFormat format);

struct IngestSummary {
  std::uint64_t rows_ok = 0;
  std::uint64_t rows_malformed = 0;
  // Label name -> dense id mapping in first-seen order; numeric label
  // strings keep their numeric value as id.
  std::vector<std::pair<std::string, ClassLabel>> labels;
};

// Parses a trace file; malformed rows are counted and skipped. Throws
// IoError if the file cannot be read and ConfigError if more than 1% of
// the rows are malformed.
std::vector<TraceRecord> read_trace(const std::string& path,
                                    TraceFormat format,
                                    IngestSummary* summary = nullptr);

struct KeyStat {
  ApproxKey key;
  std::uint64_t count = 0;
  double q_hat = 0.0;
  double max_p_hat = 0.0;
  std::vector<std::pair<ClassLabel, std::uint64_t>> label_histogram;
};

struct TraceStats {
  std::uint64_t total = 0;
  std::size_t distinct_keys = 0;
  std::vector<KeyStat> by_rank;           // descending count, full key set
  std::vector<double> dominant_prevalence;  // max_p_hat of the top_M keys
};

// Applies the approximation to every input and aggregates rank-frequency
// and per-key label histograms.
TraceStats compute_stats(const std::vector<TraceRecord>& trace,
                         const ApproxFn& approx, std::size_t top_m);

}  // namespace akcache
