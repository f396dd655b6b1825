// Acceptance suite: one pass/fail line per criterion. Exits nonzero if any
// criterion fails. Expected runtime is a few minutes on one core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "akcache/cache.hpp"
#include "akcache/harness.hpp"
#include "akcache/model.hpp"
#include "akcache/simcache.hpp"
#include "akcache/workload.hpp"

using namespace akcache;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& name,
            const std::string& detail) {
  std::printf("AC-%-2d %s  %s%s%s\n", id, pass ? "PASS" : "FAIL", name.c_str(),
              detail.empty() ? "" : " — ", detail.c_str());
  if (!pass) ++failures;
}

std::string fmt(const char* f, ...) {
  va_list args;
  va_start(args, f);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

std::vector<double> zipf_law(std::size_t n, double alpha) {
  std::vector<double> q(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = std::pow(static_cast<double>(i + 1), -alpha);
    sum += q[i];
  }
  for (auto& v : q) v /= sum;
  return q;
}

// ---------------------------------------------------------------------------
// AC-1: exact verification schedules
void criterion_schedules() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = verification_indices(2.0, ScheduleMode::PhiSequence, 6) ==
                std::vector<std::int64_t>{1, 2, 4, 8, 16, 32} &&
            verification_indices(1.5, ScheduleMode::PhiSequence, 7) ==
                std::vector<std::int64_t>{1, 2, 3, 4, 5, 7, 11};
  double ms = std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
  report(1, ok && ms < 1.0, "schedule exactness",
         fmt("beta=2 and beta=1.5 index lists, %.3f ms", ms));
}

// ---------------------------------------------------------------------------
// AC-2: closed-form special cases
void criterion_closed_forms() {
  auto u3 = model::prop1_ideal({1. / 3, 1. / 3, 1. / 3}, 2.0, 1e-10);
  auto dom = model::prop1_ideal({0.8, 0.2}, 1.5, 1e-10);
  double d1 = std::abs(u3.refresh - 0.5);
  double d2 = std::abs(u3.error - 1.0 / 3.0);
  double d3 = std::abs(dom.refresh - 0.0);
  double d4 = std::abs(dom.error - 0.2);
  bool ok = d1 <= 1e-9 && d2 <= 1e-9 && d3 <= 1e-9 && d4 <= 1e-9;
  report(2, ok, "closed-form special cases",
         fmt("uniform3 beta=2 |dr|=%.1e |de|=%.1e; (0.8,0.2) beta=1.5 "
             "|dr|=%.1e |de|=%.1e",
             d1, d2, d3, d4));
}

// ---------------------------------------------------------------------------
// AC-3 and AC-10: model-vs-simulation grid on an always-cached key, and the
// error-control dominance property measured on the same runs
struct GridOutcome {
  bool model_match = true;
  bool dominance = true;
  std::string worst;
};

GridOutcome run_grid() {
  struct Mixture {
    const char* name;
    std::vector<double> p;
  };
  const std::vector<Mixture> mixtures = {
      {"uniform m=2", {0.5, 0.5}},
      {"uniform m=3", {1. / 3, 1. / 3, 1. / 3}},
      {"uniform m=5", {0.2, 0.2, 0.2, 0.2, 0.2}},
      {"dominant 0.5 m=3", {0.5, 0.25, 0.25}},
      {"dominant 0.7 m=3", {0.7, 0.15, 0.15}},
      {"dominant 0.9 m=3", {0.9, 0.05, 0.05}},
  };
  const std::vector<double> betas = {1.3, 1.5, 2.0};
  const std::uint64_t T = 1000000;
  const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  GridOutcome out;
  for (const auto& mix : mixtures) {
    const double p_max = *std::max_element(mix.p.begin(), mix.p.end());
    for (double beta : betas) {
      WorkloadSpec spec;
      spec.key_count = 1;
      spec.mixture.kind = MixtureKind::Explicit;
      spec.mixture.p = {mix.p};
      spec.class_count = static_cast<int>(mix.p.size());
      spec.arrivals = T;

      harness::CacheSetup refresh;
      refresh.name = "auto_refresh";
      refresh.cache.capacity = 1;
      refresh.cache.replacement = Replacement::Ideal;
      refresh.cache.error_control = ErrorControl::AutoRefresh;
      refresh.cache.beta = beta;
      refresh.cache.schedule = ScheduleMode::PhiSequence;
      harness::CacheSetup nocontrol = refresh;
      nocontrol.name = "no_control";
      nocontrol.cache.error_control = ErrorControl::None;

      harness::ExperimentConfig cfg;
      cfg.source.workload = spec;
      cfg.caches = {refresh, nocontrol};
      cfg.warmup_fraction = 0.1;
      cfg.seeds = seeds;
      cfg.collect_per_key = false;
      auto reports = harness::simulate(cfg);

      harness::ExperimentConfig tail_cfg = cfg;
      tail_cfg.caches = {refresh};
      tail_cfg.warmup_fraction = 0.9;
      auto tail_reports = harness::simulate(tail_cfg);

      double r_sim = 0, e_sim = 0, e_nc = 0, r_tail = 0;
      for (const auto& rep : reports) {
        if (rep.cache_name == "auto_refresh") {
          r_sim += rep.refresh_rate / seeds.size();
          e_sim += rep.error_rate / seeds.size();
        } else {
          e_nc += rep.error_rate / seeds.size();
        }
      }
      for (const auto& rep : tail_reports) {
        r_tail += rep.refresh_rate / seeds.size();
      }

      const auto pred = model::prop1_ideal(mix.p, beta, 1e-10);
      const bool divergent = p_max * beta > 1.0;  // strictly dominant class
      bool cell_ok;
      std::string cell;
      if (divergent) {
        cell_ok = r_tail < 0.01 && std::abs(e_sim - (1.0 - p_max)) <= 0.02;
        cell = fmt("%-17s beta=%.1f divergent: tail refresh %.4f (<0.01) "
                   "|e-%0.2f|=%.4f (<=0.02) %s",
                   mix.name, beta, r_tail, 1.0 - p_max,
                   std::abs(e_sim - (1.0 - p_max)), cell_ok ? "ok" : "FAIL");
      } else {
        double dr = std::abs(r_sim - pred.refresh);
        double de = std::abs(e_sim - pred.error);
        cell_ok = dr <= 0.02 && de <= 0.02;
        cell = fmt("%-17s beta=%.1f convergent: |dr|=%.4f |de|=%.4f (<=0.02) %s",
                   mix.name, beta, dr, de, cell_ok ? "ok" : "FAIL");
      }
      std::printf("      %s\n", cell.c_str());
      if (!cell_ok) {
        out.model_match = false;
        out.worst = cell;
      }
      if (e_sim > e_nc + 0.005) out.dominance = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// AC-4: error without control matches 1 - sum p^2
void criterion_nocontrol() {
  std::mt19937_64 rng(99);
  bool ok = true;
  double worst = 0.0;
  for (int round = 0; round < 10; ++round) {
    std::uniform_int_distribution<int> m_dist(2, 6);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> p(m_dist(rng));
    double sum = 0;
    for (auto& v : p) {
      v = u(rng);
      sum += v;
    }
    for (auto& v : p) v /= sum;

    const std::size_t N = 10000;
    WorkloadSpec spec;
    spec.key_count = N;
    spec.mixture.kind = MixtureKind::Explicit;
    spec.mixture.p.assign(N, p);
    spec.class_count = static_cast<int>(p.size());
    spec.arrivals = 1000000;

    harness::CacheSetup setup;
    setup.name = "nc";
    setup.cache.capacity = N;
    setup.cache.replacement = Replacement::Ideal;
    setup.cache.error_control = ErrorControl::None;

    harness::ExperimentConfig cfg;
    cfg.source.workload = spec;
    cfg.caches = {setup};
    cfg.warmup_fraction = 0.1;
    cfg.seeds = {static_cast<std::uint64_t>(round + 1)};
    cfg.collect_per_key = false;
    auto rep = harness::simulate(cfg).front();

    double predicted = model::single_insertion_error(p);
    double diff = std::abs(rep.error_rate - predicted);
    worst = std::max(worst, diff);
    ok = ok && diff <= 0.01;
  }
  report(4, ok, "no-control error", fmt("10 random mixtures, worst |dE|=%.4f (<=0.01)", worst));
}

// ---------------------------------------------------------------------------
// AC-5: characteristic time solver
void criterion_tc() {
  bool ok = true;
  double worst_res = 0.0;
  for (double alpha : {0.8, 1.0, 1.2}) {
    auto q = zipf_law(100000, alpha);
    auto tc = model::solve_tc(q, 1000);
    worst_res = std::max(worst_res, std::abs(tc.residual));
    ok = ok && std::abs(tc.residual) <= 1e-6;
  }
  std::vector<double> uq(100000, 1e-5);
  auto tc = model::solve_tc(uq, 1000);
  double closed = -100000.0 * std::log(1.0 - 1000.0 / 100000.0);
  double rel = std::abs(tc.t_c - closed) / closed;
  ok = ok && rel <= 1e-6;
  report(5, ok, "characteristic time",
         fmt("worst residual %.1e (<=1e-6), uniform closed form rel err %.1e "
             "(<=1e-6)",
             worst_res, rel));
}

// ---------------------------------------------------------------------------
// AC-6: LRU hit rate approximation at scale
void criterion_lru_hit_rate() {
  const std::size_t N = 100000, K = 1000;
  const std::uint64_t T = 10000000;
  auto t0 = std::chrono::steady_clock::now();

  WorkloadSpec spec;
  spec.key_count = N;
  spec.popularity.kind = PopularityKind::Zipf;
  spec.popularity.alpha = 0.8;
  spec.mixture.kind = MixtureKind::SingleClass;
  spec.class_count = 200;
  spec.arrivals = T;

  TraceGenerator probe(spec);
  double H_model =
      model::lru_hit_rate(probe.popularity(), model::solve_tc(probe.popularity(), K).t_c);

  harness::CacheSetup setup;
  setup.name = "lru";
  setup.cache.capacity = K;

  harness::ExperimentConfig cfg;
  cfg.source.workload = spec;
  cfg.caches = {setup};
  cfg.warmup_fraction = 0.1;
  cfg.seeds = {1};
  cfg.collect_per_key = false;
  auto rep = harness::simulate(cfg).front();

  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
  double diff = std::abs(rep.hit_rate - H_model);
  report(6, diff <= 0.02 && secs < 300.0, "LRU hit-rate approximation",
         fmt("H_sim=%.5f H_model=%.5f |diff|=%.5f (<=0.02), %.1f s", rep.hit_rate,
             H_model, diff, secs));
}

// ---------------------------------------------------------------------------
// AC-7: LRU auto-refresh numeric model vs Monte Carlo and full simulation

// Independent Monte Carlo of the key-run process (kept free of the solver's
// interval algebra): arrivals stay cached w.p. h, verifications on arrivals
// max{n, floor(beta^(n-1))}, mismatch restarts with a conditional draw,
// eviction restarts fresh.
struct McRates {
  double refresh, error;
};

McRates run_process_oracle(double h, const std::vector<double>& p, double beta,
                           std::uint64_t runs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&]() { return (rng() >> 11) * 0x1.0p-53; };
  auto phi = [&](int n) {
    return std::max<double>(n, std::floor(std::pow(beta, n - 1)));
  };
  auto draw_fresh = [&]() {
    double u = uniform(), acc = 0.0;
    for (std::size_t j = 0; j + 1 < p.size(); ++j) {
      acc += p[j];
      if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(p.size()) - 1;
  };
  auto draw_other = [&](int j) {
    double u = uniform() * (1.0 - p[j]), acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (static_cast<int>(k) == j) continue;
      acc += p[k];
      if (u < acc) return static_cast<int>(k);
    }
    return j == 0 ? 1 : 0;
  };
  const double ln_h = std::log(h);
  long double sum_len = 0, sum_inf = 0, sum_err = 0;
  int cls = draw_fresh();
  for (std::uint64_t s = 0; s < runs; ++s) {
    double last = 1.0, length = 0.0;
    int n = 2, inferences = 1;
    bool mismatch = false;
    for (;;) {
      double survivals = std::floor(std::log(uniform()) / ln_h);
      if (survivals < phi(n) - last) {
        length = last + survivals;
        break;
      }
      if (uniform() < p[cls]) {
        ++inferences;
        last = phi(n);
        ++n;
      } else {
        mismatch = true;
        length = phi(n) - 1.0;
        break;
      }
    }
    sum_len += length;
    sum_inf += inferences;
    sum_err += (1.0 - p[cls]) * (length - inferences);
    cls = mismatch ? draw_other(cls) : draw_fresh();
  }
  return {static_cast<double>(sum_inf / sum_len),
          static_cast<double>(sum_err / sum_len)};
}

void criterion_lru_numeric() {
  const std::vector<double> p = {0.5, 0.3, 0.2};
  const double beta = 2.0, h = 0.9;

  auto solver = model::lru_autorefresh_key(h, p, beta);
  auto mc = run_process_oracle(h, p, beta, 10000000, 424242);
  double dmc_r = std::abs(solver.refresh - mc.refresh);
  double dmc_e = std::abs(solver.error - mc.error);

  // full-trace LRU: uniform 100 keys, capacity 90 -> per-key h = 0.9
  const std::size_t N = 100, K = 90;
  WorkloadSpec spec;
  spec.key_count = N;
  spec.mixture.kind = MixtureKind::Explicit;
  spec.mixture.p.assign(N, p);
  spec.class_count = 3;
  spec.arrivals = 2000000;

  harness::CacheSetup setup;
  setup.name = "lru";
  setup.cache.capacity = K;
  setup.cache.error_control = ErrorControl::AutoRefresh;
  setup.cache.beta = beta;
  setup.cache.schedule = ScheduleMode::PhiSequence;

  harness::ExperimentConfig cfg;
  cfg.source.workload = spec;
  cfg.caches = {setup};
  cfg.warmup_fraction = 0.1;
  cfg.seeds = {1, 2, 3};
  cfg.collect_per_key = false;
  auto mean = harness::mean_metrics(harness::simulate(cfg));
  double dsim_r = std::abs(mean.inference_fraction - solver.refresh);
  double dsim_e = std::abs(mean.error_rate - solver.error);

  bool ok = dmc_r < 0.005 && dmc_e < 0.005 && dsim_r < 0.02 && dsim_e < 0.02;
  report(7, ok, "LRU auto-refresh numeric model",
         fmt("vs MC |dr|=%.5f |de|=%.5f (<0.005); vs trace |dr|=%.5f "
             "|de|=%.5f (<0.02)",
             dmc_r, dmc_e, dsim_r, dsim_e));
}

// ---------------------------------------------------------------------------
// AC-8: partition-tree kNN equals linear scan
void criterion_knn_equivalence() {
  std::mt19937_64 rng(2024);
  const std::size_t dim = 8;
  std::uint64_t mismatches = 0, checked = 0;
  for (int pop = 0; pop < 1000; ++pop) {
    std::uniform_int_distribution<std::size_t> size_dist(1, 1000);
    std::uniform_int_distribution<std::int32_t> coord(-40, 40);
    const std::size_t population = size_dist(rng);

    SimilarityConfig base;
    base.capacity = population;
    base.k_neighbors = 1;
    base.dimension = dim;
    SimilarityConfig tree = base;
    tree.index = IndexKind::PartitionTree;
    SimilarityCache linear(base), indexed(tree);
    for (std::size_t i = 0; i < population; ++i) {
      InputVector pt(dim);
      for (auto& e : pt) e = coord(rng);
      linear.seed_entry(pt, static_cast<ClassLabel>(i % 11));
      indexed.seed_entry(pt, static_cast<ClassLabel>(i % 11));
    }
    const int ks[] = {1, 3, 10, 25};
    for (int q = 0; q < 100; ++q) {
      InputVector query(dim);
      for (auto& e : query) e = coord(rng);
      auto a = linear.knn(query, ks[q % 4]);
      auto b = indexed.knn(query, ks[q % 4]);
      ++checked;
      if (a.size() != b.size()) {
        ++mismatches;
        continue;
      }
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].entry_id != b[i].entry_id ||
            std::abs(a[i].distance - b[i].distance) > 1e-9) {
          ++mismatches;
          break;
        }
      }
    }
  }
  report(8, mismatches == 0, "kNN index equivalence",
         fmt("%llu queries over 1000 random populations, %llu mismatches",
             static_cast<unsigned long long>(checked),
             static_cast<unsigned long long>(mismatches)));
}

// ---------------------------------------------------------------------------
// AC-9: lookup latency ordering
void criterion_latency() {
  std::vector<harness::BenchSetup> setups(3);
  setups[0].name = "exact";
  setups[0].paradigm = harness::Paradigm::Exact;
  setups[1].name = "approx_key";
  setups[1].paradigm = harness::Paradigm::ApproxKey;
  setups[1].approx = ApproxFn::parse("prefix:10");
  setups[2].name = "similarity_linear";
  setups[2].paradigm = harness::Paradigm::Similarity;
  setups[2].index = IndexKind::LinearScan;

  auto rows = harness::bench_lookup({10000}, setups, 2000, 7);
  double exact_us = rows[0].median_us;
  double approx_ratio = rows[1].ratio_vs_exact;
  double sim_ratio = rows[2].ratio_vs_exact;
  bool ok = sim_ratio >= 10.0 && approx_ratio <= 5.0;
  report(9, ok, "lookup latency ordering",
         fmt("K=10^4 medians: exact %.3fus, approx %.3fus (x%.2f <=5), "
             "similarity %.1fus (x%.0f >=10)",
             exact_us, rows[1].median_us, approx_ratio, rows[2].median_us,
             sim_ratio));
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_schedules();
  criterion_closed_forms();

  std::printf("AC-3/AC-10 grid (18 configurations, 5 seeds each):\n");
  auto grid = run_grid();
  report(3, grid.model_match, "model-vs-simulation on an always-cached key",
         grid.model_match ? "all 18 configurations within tolerance"
                          : "see per-configuration lines above");

  criterion_nocontrol();
  criterion_tc();
  criterion_lru_hit_rate();
  criterion_lru_numeric();
  criterion_knn_equivalence();
  criterion_latency();

  report(10, grid.dominance, "error-control dominance",
         "auto-refresh error <= no-control error + 0.005 on every grid cell");

  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
