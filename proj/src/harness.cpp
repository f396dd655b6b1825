#include "akcache/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "akcache/error.hpp"
#include "akcache/rng.hpp"

namespace akcache::harness {

namespace {

using Clock = std::chrono::steady_clock;

class GeneratorStream : public RecordStream {
 public:
  GeneratorStream(const WorkloadSpec& spec, std::uint64_t seed)
      : gen_(spec, seed) {}
  const TraceRecord* next() override {
    if (gen_.done()) return nullptr;
    return &gen_.next();
  }
  std::uint64_t size() const override { return gen_.spec().arrivals; }

 private:
  TraceGenerator gen_;
};

class VectorStream : public RecordStream {
 public:
  explicit VectorStream(const std::vector<TraceRecord>* records)
      : records_(records) {}
  const TraceRecord* next() override {
    if (pos_ >= records_->size()) return nullptr;
    return &(*records_)[pos_++];
  }
  std::uint64_t size() const override { return records_->size(); }

 private:
  const std::vector<TraceRecord>* records_;
  std::size_t pos_ = 0;
};

// Empirical approximate-key popularity ranks from a full pass, most
// popular = rank 1; ties resolved by first appearance.
std::unordered_map<ApproxKey, std::size_t> popularity_ranks(
    RecordStream& stream, const ApproxFn& approx) {
  std::unordered_map<ApproxKey, std::pair<std::uint64_t, std::uint64_t>>
      counts;  // count, first-seen order
  std::uint64_t order = 0;
  while (const TraceRecord* rec = stream.next()) {
    auto [it, fresh] =
        counts.try_emplace(approx(rec->input), std::make_pair(0ULL, order));
    ++it->second.first;
    if (fresh) ++order;
  }
  std::vector<std::pair<const ApproxKey*,
                        std::pair<std::uint64_t, std::uint64_t>>>
      sorted;
  sorted.reserve(counts.size());
  for (const auto& [key, v] : counts) sorted.emplace_back(&key, v);
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.second.second < b.second.second;
  });
  std::unordered_map<ApproxKey, std::size_t> ranks;
  ranks.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    ranks.emplace(*sorted[i].first, i + 1);
  }
  return ranks;
}

double quantile_us(std::vector<double>& samples, double q) {
  if (samples.empty()) return 0.0;
  std::size_t idx = static_cast<std::size_t>(q * (samples.size() - 1));
  std::nth_element(samples.begin(), samples.begin() + idx, samples.end());
  return samples[idx];
}

constexpr std::uint64_t kLatencySampleStride = 64;

}  // namespace

std::string to_string(Paradigm p) {
  switch (p) {
    case Paradigm::Exact:
      return "exact";
    case Paradigm::ApproxKey:
      return "approx_key";
    case Paradigm::Similarity:
      return "similarity";
  }
  return "?";
}

MetricsReport simulate_one(const CacheSetup& setup, const StreamFactory& make,
                           double warmup_fraction, std::uint64_t seed,
                           bool collect_per_key) {
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
    throw ConfigError("warmup_fraction must lie in [0, 1)");
  }

  MetricsReport rep;
  rep.cache_name = setup.name;
  rep.paradigm = to_string(setup.paradigm);
  rep.seed = seed;

  std::unique_ptr<ApproxKeyCache> cache;
  std::unique_ptr<SimilarityCache> sim;
  if (setup.paradigm == Paradigm::Similarity) {
    sim = std::make_unique<SimilarityCache>(setup.sim);
    rep.approx = "identity";
    rep.capacity = setup.sim.capacity;
    rep.mode = setup.sim.index == IndexKind::LinearScan ? "linear_scan"
                                                        : "partition_tree";
  } else {
    CacheConfig cfg = setup.cache;
    if (setup.paradigm == Paradigm::Exact) cfg.approx = ApproxFn::identity();
    cache = std::make_unique<ApproxKeyCache>(cfg);
    rep.approx = cfg.approx.to_string();
    rep.capacity = cfg.capacity;
    rep.error_control = cfg.error_control == ErrorControl::AutoRefresh;
    rep.beta = rep.error_control ? cfg.beta : 0.0;
    rep.mode = !rep.error_control ? "none"
               : cfg.schedule == ScheduleMode::Algorithm1 ? "algorithm1"
                                                          : "phi_sequence";
    if (cfg.replacement == Replacement::Ideal) {
      auto pass = make();
      cache->set_popularity_ranks(popularity_ranks(*pass, cfg.approx));
    }
  }

  auto stream = make();
  const std::uint64_t total = stream->size();
  const std::uint64_t warmup =
      static_cast<std::uint64_t>(warmup_fraction * static_cast<double>(total));

  std::vector<double> latency_us;
  latency_us.reserve(total / kLatencySampleStride + 1);

  ClassLabel truth = 0;
  const Classifier oracle = [&truth](const InputVector&) { return truth; };

  std::uint64_t t = 0;
  while (const TraceRecord* rec = stream->next()) {
    truth = rec->true_label;
    LookupOutcome out;
    if (t % kLatencySampleStride == 0) {
      auto t0 = Clock::now();
      out = cache ? cache->lookup_and_maintain(rec->input, oracle)
                  : sim->lookup_and_maintain(rec->input, oracle);
      auto t1 = Clock::now();
      if (t >= warmup) {
        latency_us.push_back(
            std::chrono::duration<double, std::micro>(t1 - t0).count());
      }
    } else {
      out = cache ? cache->lookup_and_maintain(rec->input, oracle)
                  : sim->lookup_and_maintain(rec->input, oracle);
    }
    ++t;
    if (t <= warmup) continue;

    ++rep.arrivals;
    const bool is_error =
        out.kind == OutcomeKind::HitServed && out.label != rec->true_label;
    switch (out.kind) {
      case OutcomeKind::MissInserted:
        ++rep.misses;
        ++rep.oracle_calls;
        break;
      case OutcomeKind::HitServed:
        ++rep.hits;
        if (is_error) ++rep.errors;
        break;
      case OutcomeKind::HitVerifiedMatch:
      case OutcomeKind::HitVerifiedMismatch:
        ++rep.hits;
        ++rep.refreshes;
        ++rep.oracle_calls;
        break;
    }
    if (collect_per_key) {
      PerKeyStats& pk = rep.per_key[rec->key_index];
      ++pk.arrivals;
      pk.hits += out.kind != OutcomeKind::MissInserted;
      pk.oracle_calls += out.inference_invoked;
      pk.errors += is_error;
    }
  }

  if (rep.hits + rep.misses != rep.arrivals ||
      rep.oracle_calls != rep.misses + rep.refreshes) {
    throw NumericError("metrics accounting identity violated");
  }
  const double n = static_cast<double>(std::max<std::uint64_t>(1, rep.arrivals));
  rep.hit_rate = rep.hits / n;
  rep.refresh_rate = rep.refreshes / n;
  rep.error_rate = rep.errors / n;
  rep.inference_fraction = rep.oracle_calls / n;
  if (!rep.error_control) rep.e_nc = rep.error_rate;
  if (cache) rep.sequence_lengths = cache->sequence_length_histogram();
  rep.lookup_p50_us = quantile_us(latency_us, 0.5);
  rep.lookup_p99_us = quantile_us(latency_us, 0.99);
  return rep;
}

std::vector<MetricsReport> simulate(const ExperimentConfig& config) {
  if (config.caches.empty()) {
    throw ConfigError("experiment requires at least one cache setup");
  }
  if (config.seeds.empty()) {
    throw ConfigError("experiment requires at least one seed");
  }
  if (config.warmup_fraction < 0.0 || config.warmup_fraction >= 1.0) {
    throw ConfigError("warmup_fraction must lie in [0, 1)");
  }

  std::vector<TraceRecord> file_records;
  if (!config.source.workload) {
    file_records = read_trace(config.source.path, config.source.format);
  }

  // Each (cache, seed) run owns its cache instance and trace pass; runs
  // execute concurrently and the results are merged here in fixed order.
  struct Run {
    const CacheSetup* setup;
    std::uint64_t seed;
  };
  std::vector<Run> runs;
  for (const auto& setup : config.caches) {
    for (std::uint64_t seed : config.seeds) runs.push_back({&setup, seed});
  }

  std::vector<MetricsReport> out(runs.size());
  const unsigned workers =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(runs.size())));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      try {
        StreamFactory make;
        if (config.source.workload) {
          const WorkloadSpec& spec = *config.source.workload;
          const std::uint64_t seed = runs[i].seed;
          make = [&spec, seed]() -> std::unique_ptr<RecordStream> {
            return std::make_unique<GeneratorStream>(spec, seed);
          };
        } else {
          make = [&file_records]() -> std::unique_ptr<RecordStream> {
            return std::make_unique<VectorStream>(&file_records);
          };
        }
        out[i] = simulate_one(*runs[i].setup, make, config.warmup_fraction,
                              runs[i].seed, config.collect_per_key);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(runs.size());
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

MeanMetrics mean_metrics(const std::vector<MetricsReport>& runs) {
  MeanMetrics m;
  if (runs.empty()) return m;
  for (const auto& r : runs) {
    m.hit_rate += r.hit_rate;
    m.refresh_rate += r.refresh_rate;
    m.error_rate += r.error_rate;
    m.inference_fraction += r.inference_fraction;
  }
  const double n = static_cast<double>(runs.size());
  m.hit_rate /= n;
  m.refresh_rate /= n;
  m.error_rate /= n;
  m.inference_fraction /= n;
  if (runs.size() > 1) {
    double sh = 0, sr = 0, se = 0;
    for (const auto& r : runs) {
      sh += (r.hit_rate - m.hit_rate) * (r.hit_rate - m.hit_rate);
      sr += (r.refresh_rate - m.refresh_rate) * (r.refresh_rate - m.refresh_rate);
      se += (r.error_rate - m.error_rate) * (r.error_rate - m.error_rate);
    }
    m.hit_rate_std = std::sqrt(sh / (n - 1.0));
    m.refresh_rate_std = std::sqrt(sr / (n - 1.0));
    m.error_rate_std = std::sqrt(se / (n - 1.0));
  }
  return m;
}

std::vector<ValidationRow> validate(const std::vector<MetricPair>& pairs,
                                    double tol_abs) {
  std::vector<ValidationRow> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    ValidationRow row;
    row.metric = p.name;
    row.sim = p.sim;
    row.model = p.model;
    row.diff = std::abs(p.sim - p.model);
    row.tol = tol_abs;
    row.pass = row.diff <= tol_abs;
    rows.push_back(row);
  }
  return rows;
}

std::vector<ValidationRow> validate_per_key(
    const std::map<std::int64_t, PerKeyStats>& sim,
    const std::vector<model::KeyRates>& rates, double tol_abs) {
  if (sim.size() != rates.size()) {
    throw ConfigError("per-key validation: simulated and modeled key sets differ");
  }
  std::vector<MetricPair> pairs;
  pairs.reserve(2 * rates.size());
  for (const auto& [key, st] : sim) {
    if (key < 0 || static_cast<std::size_t>(key) >= rates.size()) {
      throw ConfigError("per-key validation: unknown key " + std::to_string(key));
    }
    const double n = static_cast<double>(std::max<std::uint64_t>(1, st.arrivals));
    const auto& kr = rates[static_cast<std::size_t>(key)];
    pairs.push_back({"key" + std::to_string(key) + ".r",
                     static_cast<double>(st.oracle_calls) / n, kr.refresh});
    pairs.push_back({"key" + std::to_string(key) + ".e",
                     static_cast<double>(st.errors) / n, kr.error});
  }
  return validate(pairs, tol_abs);
}

bool all_pass(const std::vector<ValidationRow>& rows) {
  return std::all_of(rows.begin(), rows.end(),
                     [](const ValidationRow& r) { return r.pass; });
}

void print_validation(std::ostream& os, const std::vector<ValidationRow>& rows) {
  for (const auto& r : rows) {
    os << (r.pass ? "PASS" : "FAIL") << "  " << r.metric << "  sim=" << r.sim
       << " model=" << r.model << " |diff|=" << r.diff << " tol=" << r.tol
       << "\n";
  }
}

namespace {

// Distinct 100-element flow vectors: key digits up front, then per-key
// deterministic filler resembling packet sizes.
InputVector bench_flow(std::size_t id, std::uint64_t seed) {
  InputVector v(100);
  for (int d = 0; d < 4; ++d) {
    v[d] = static_cast<std::int32_t>((id >> (8 * d)) & 0xff);
  }
  Rng rng(mix_seed(seed ^ (id * 0x9e3779b97f4a7c15ULL)));
  for (std::size_t i = 4; i < v.size(); ++i) {
    v[i] = static_cast<std::int32_t>(rng.next_int(-1500, 1500));
  }
  return v;
}

}  // namespace

std::vector<BenchRow> bench_lookup(const std::vector<std::size_t>& k_values,
                                   const std::vector<BenchSetup>& paradigms,
                                   std::size_t queries, std::uint64_t seed) {
  std::vector<BenchRow> rows;
  const Classifier oracle = [](const InputVector&) { return ClassLabel{0}; };

  for (std::size_t K : k_values) {
    std::vector<InputVector> population;
    population.reserve(K);
    for (std::size_t i = 0; i < K; ++i) population.push_back(bench_flow(i, seed));

    // Warm query order, stored keys only.
    Rng rng(mix_seed(seed + K));
    std::vector<std::size_t> order(queries);
    for (auto& idx : order) idx = rng.next_index(K);

    double exact_median = 0.0;
    for (const auto& setup : paradigms) {
      std::unique_ptr<ApproxKeyCache> cache;
      std::unique_ptr<SimilarityCache> sim;
      if (setup.paradigm == Paradigm::Similarity) {
        SimilarityConfig cfg;
        cfg.capacity = K;
        cfg.k_neighbors = 10;
        cfg.epsilon = 1.0;
        cfg.index = setup.index;
        cfg.dimension = 100;
        sim = std::make_unique<SimilarityCache>(cfg);
        for (const auto& flow : population) sim->seed_entry(flow, 0);
      } else {
        CacheConfig cfg;
        cfg.capacity = K;
        cfg.replacement = Replacement::Lru;
        cfg.approx = setup.paradigm == Paradigm::Exact ? ApproxFn::identity()
                                                       : setup.approx;
        cfg.error_control = ErrorControl::None;
        cache = std::make_unique<ApproxKeyCache>(cfg);
        for (const auto& flow : population) cache->lookup_and_maintain(flow, oracle);
      }

      std::vector<double> samples;
      samples.reserve(queries);
      for (std::size_t qi = 0; qi < queries; ++qi) {
        const InputVector& flow = population[order[qi]];
        auto t0 = Clock::now();
        if (cache) {
          cache->lookup_and_maintain(flow, oracle);
        } else {
          sim->lookup_and_maintain(flow, oracle);
        }
        auto t1 = Clock::now();
        samples.push_back(
            std::chrono::duration<double, std::micro>(t1 - t0).count());
      }
      BenchRow row;
      row.paradigm = setup.name;
      row.capacity = K;
      row.median_us = quantile_us(samples, 0.5);
      row.p99_us = quantile_us(samples, 0.99);
      if (setup.paradigm == Paradigm::Exact) exact_median = row.median_us;
      row.ratio_vs_exact =
          exact_median > 0.0 ? row.median_us / exact_median : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<AccuracyRow> compare_accuracy(const ExperimentConfig& config) {
  std::vector<AccuracyRow> rows;
  auto reports = simulate(config);
  for (const auto& setup : config.caches) {
    std::vector<MetricsReport> runs;
    for (const auto& rep : reports) {
      if (rep.cache_name == setup.name) runs.push_back(rep);
    }
    AccuracyRow row;
    row.cache_name = setup.name;
    double n = 0.0;
    for (const auto& r : runs) {
      row.correct_hit_frac += static_cast<double>(r.hits - r.errors);
      row.error_hit_frac += static_cast<double>(r.errors);
      row.miss_frac += static_cast<double>(r.misses);
      n += static_cast<double>(r.arrivals);
    }
    row.correct_hit_frac /= n;
    row.error_hit_frac /= n;
    row.miss_frac /= n;
    rows.push_back(row);
  }
  return rows;
}

void write_metrics_csv(std::ostream& os,
                       const std::vector<MetricsReport>& rows) {
  os << "paradigm,approx,K,beta,mode,H,R,E,E_nc,inference_fraction,seed\n";
  for (const auto& r : rows) {
    os << r.paradigm << ',' << r.approx << ',' << r.capacity << ',';
    if (r.beta > 0.0) os << r.beta;
    os << ',' << r.mode << ',' << r.hit_rate << ',' << r.refresh_rate << ','
       << r.error_rate << ',';
    if (r.e_nc) os << *r.e_nc;
    os << ',' << r.inference_fraction << ',' << r.seed << '\n';
  }
}

}  // namespace akcache::harness
