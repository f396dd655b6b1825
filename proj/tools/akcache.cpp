// Experiment driver for approximate-key caching: workload generation,
// trace statistics, simulation, analytical models, model-vs-simulation
// validation, lookup benchmarks, and accuracy comparisons.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "akcache/error.hpp"
#include "akcache/harness.hpp"
#include "akcache/model.hpp"
#include "akcache/workload.hpp"

using json = nlohmann::json;
using namespace akcache;

namespace {

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return j;
}

WorkloadSpec parse_workload(const json& j) {
  WorkloadSpec spec;
  spec.key_count = j.at("keys").get<std::size_t>();
  spec.arrivals = j.at("arrivals").get<std::uint64_t>();
  spec.class_count = j.value("classes", 1);
  spec.seed = j.value("seed", 1ULL);
  spec.noise_elements = j.value("noise_elements", 0);

  const json& pop = j.at("popularity");
  std::string kind = pop.at("kind").get<std::string>();
  if (kind == "zipf") {
    spec.popularity.kind = PopularityKind::Zipf;
    spec.popularity.alpha = pop.at("alpha").get<double>();
  } else if (kind == "uniform") {
    spec.popularity.kind = PopularityKind::Uniform;
  } else if (kind == "explicit") {
    spec.popularity.kind = PopularityKind::Explicit;
    spec.popularity.q = pop.at("q").get<std::vector<double>>();
  } else {
    throw ConfigError("unknown popularity kind '" + kind + "'");
  }

  const json& mix = j.at("mixture");
  kind = mix.at("kind").get<std::string>();
  if (kind == "single_class") {
    spec.mixture.kind = MixtureKind::SingleClass;
  } else if (kind == "uniform_classes") {
    spec.mixture.kind = MixtureKind::UniformClasses;
    spec.mixture.m = mix.at("m").get<int>();
  } else if (kind == "dominant") {
    spec.mixture.kind = MixtureKind::Dominant;
    spec.mixture.p_max = mix.at("p_max").get<double>();
    spec.mixture.m = mix.at("m").get<int>();
  } else if (kind == "explicit") {
    spec.mixture.kind = MixtureKind::Explicit;
    spec.mixture.p = mix.at("p").get<std::vector<std::vector<double>>>();
  } else {
    throw ConfigError("unknown mixture kind '" + kind + "'");
  }
  return spec;
}

harness::CacheSetup parse_cache(const json& j, int index) {
  harness::CacheSetup setup;
  std::string paradigm = j.at("paradigm").get<std::string>();
  setup.name = j.value("name", paradigm + "#" + std::to_string(index));
  if (paradigm == "similarity") {
    setup.paradigm = harness::Paradigm::Similarity;
    setup.sim.capacity = j.at("capacity").get<std::size_t>();
    setup.sim.k_neighbors = j.value("k_neighbors", 10);
    setup.sim.epsilon = j.value("epsilon", 0.0);
    setup.sim.dimension = j.at("dimension").get<std::size_t>();
    std::string idx = j.value("index", "linear_scan");
    if (idx == "linear_scan") {
      setup.sim.index = IndexKind::LinearScan;
    } else if (idx == "partition_tree") {
      setup.sim.index = IndexKind::PartitionTree;
    } else {
      throw ConfigError("unknown similarity index '" + idx + "'");
    }
    return setup;
  }
  if (paradigm == "exact") {
    setup.paradigm = harness::Paradigm::Exact;
  } else if (paradigm == "approx_key") {
    setup.paradigm = harness::Paradigm::ApproxKey;
    setup.cache.approx = ApproxFn::parse(j.value("approx", "identity"));
  } else {
    throw ConfigError("unknown paradigm '" + paradigm + "'");
  }
  setup.cache.capacity = j.at("capacity").get<std::size_t>();
  std::string repl = j.value("replacement", "lru");
  if (repl == "lru") {
    setup.cache.replacement = Replacement::Lru;
  } else if (repl == "ideal") {
    setup.cache.replacement = Replacement::Ideal;
  } else {
    throw ConfigError("unknown replacement '" + repl + "'");
  }
  std::string ec = j.value("error_control", "none");
  if (ec == "none") {
    setup.cache.error_control = ErrorControl::None;
  } else if (ec == "auto_refresh") {
    setup.cache.error_control = ErrorControl::AutoRefresh;
    setup.cache.beta = j.at("beta").get<double>();
    std::string sched = j.value("schedule", "algorithm1");
    if (sched == "algorithm1") {
      setup.cache.schedule = ScheduleMode::Algorithm1;
    } else if (sched == "phi_sequence") {
      setup.cache.schedule = ScheduleMode::PhiSequence;
    } else {
      throw ConfigError("unknown schedule '" + sched + "'");
    }
  } else {
    throw ConfigError("unknown error_control '" + ec + "'");
  }
  return setup;
}

harness::ExperimentConfig parse_experiment(const json& j) {
  harness::ExperimentConfig cfg;
  if (j.contains("workload")) {
    cfg.source.workload = parse_workload(j.at("workload"));
  } else if (j.contains("trace")) {
    cfg.source.path = j.at("trace").at("path").get<std::string>();
    cfg.source.format =
        j.at("trace").value("format", "csv") == std::string("jsonl")
            ? TraceFormat::JsonLines
            : TraceFormat::Csv;
  } else {
    throw ConfigError("config needs a 'workload' or 'trace' section");
  }
  if (!j.contains("caches") || !j.at("caches").is_array() ||
      j.at("caches").empty()) {
    throw ConfigError("config needs a non-empty 'caches' array");
  }
  int i = 0;
  for (const auto& cj : j.at("caches")) cfg.caches.push_back(parse_cache(cj, i++));
  cfg.warmup_fraction = j.value("warmup_fraction", 0.1);
  if (j.contains("seeds")) {
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  }
  cfg.collect_per_key = j.value("collect_per_key", true);
  cfg.model_validation = j.value("model_validation", false);
  return cfg;
}

TraceFormat parse_format(const std::string& f) {
  if (f == "csv") return TraceFormat::Csv;
  if (f == "jsonl") return TraceFormat::JsonLines;
  throw ConfigError("unknown trace format '" + f + "'");
}

std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

json report_to_json(const harness::MetricsReport& r, bool with_per_key) {
  json j{{"cache", r.cache_name},
         {"paradigm", r.paradigm},
         {"approx", r.approx},
         {"K", r.capacity},
         {"beta", r.beta},
         {"mode", r.mode},
         {"seed", r.seed},
         {"arrivals", r.arrivals},
         {"hits", r.hits},
         {"misses", r.misses},
         {"refreshes", r.refreshes},
         {"oracle_calls", r.oracle_calls},
         {"errors", r.errors},
         {"H", r.hit_rate},
         {"R", r.refresh_rate},
         {"E", r.error_rate},
         {"inference_fraction", r.inference_fraction},
         {"lookup_p50_us", r.lookup_p50_us},
         {"lookup_p99_us", r.lookup_p99_us}};
  if (r.e_nc) j["E_nc"] = *r.e_nc;
  if (with_per_key) {
    json pk = json::object();
    for (const auto& [key, st] : r.per_key) {
      pk[std::to_string(key)] = {{"arrivals", st.arrivals},
                                 {"hits", st.hits},
                                 {"oracle_calls", st.oracle_calls},
                                 {"errors", st.errors}};
    }
    j["per_key"] = std::move(pk);
  }
  return j;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed_override, bool has_seed,
                 const std::string& format, const std::string& out_name) {
  json cfg = load_json(config_path);
  WorkloadSpec spec = parse_workload(cfg.at("workload"));
  if (has_seed) spec.seed = seed_override;
  TraceFormat fmt = parse_format(format);
  auto dir = prepare_dir(out_dir);
  std::string name =
      out_name.empty() ? (fmt == TraceFormat::Csv ? "trace.csv" : "trace.jsonl")
                       : out_name;
  write_trace(spec, (dir / name).string(), fmt);
  std::cout << "wrote " << (dir / name).string() << " (" << spec.arrivals
            << " records, seed " << spec.seed << ")\n";
  return 0;
}

int cmd_stats(const std::string& trace_path, const std::string& format,
              const std::string& approx_text, std::size_t top_m,
              const std::string& out_dir) {
  IngestSummary summary;
  auto trace = read_trace(trace_path, parse_format(format), &summary);
  ApproxFn fn = ApproxFn::parse(approx_text);
  TraceStats stats = compute_stats(trace, fn, top_m);
  auto dir = prepare_dir(out_dir);

  auto rf = open_out(dir / "rank_frequency.csv");
  rf << "rank,count,q_hat,max_p_hat\n";
  for (std::size_t i = 0; i < stats.by_rank.size(); ++i) {
    const auto& ks = stats.by_rank[i];
    rf << (i + 1) << ',' << ks.count << ',' << ks.q_hat << ',' << ks.max_p_hat
       << '\n';
  }

  auto dp = open_out(dir / "dominant_prevalence.csv");
  dp << "bin_low,bin_high,key_count\n";
  constexpr int kBins = 20;
  std::vector<std::uint64_t> bins(kBins, 0);
  for (double v : stats.dominant_prevalence) {
    int b = std::min(kBins - 1, static_cast<int>(v * kBins));
    ++bins[b];
  }
  for (int b = 0; b < kBins; ++b) {
    dp << static_cast<double>(b) / kBins << ','
       << static_cast<double>(b + 1) / kBins << ',' << bins[b] << '\n';
  }

  auto lb = open_out(dir / "labels.csv");
  lb << "label,id\n";
  for (const auto& [name, id] : summary.labels) lb << name << ',' << id << '\n';

  std::cout << "rows " << summary.rows_ok << " (malformed "
            << summary.rows_malformed << "), distinct keys under "
            << fn.to_string() << ": " << stats.distinct_keys << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed_override, bool has_seed) {
  json cfg = load_json(config_path);
  harness::ExperimentConfig exp = parse_experiment(cfg);
  if (has_seed) exp.seeds = {seed_override};
  auto reports = harness::simulate(exp);
  auto dir = prepare_dir(out_dir);

  auto csv = open_out(dir / "metrics.csv");
  harness::write_metrics_csv(csv, reports);

  json out = json::array();
  for (const auto& r : reports) out.push_back(report_to_json(r, true));
  json means = json::object();
  for (const auto& setup : exp.caches) {
    std::vector<harness::MetricsReport> runs;
    for (const auto& r : reports) {
      if (r.cache_name == setup.name) runs.push_back(r);
    }
    auto m = harness::mean_metrics(runs);
    means[setup.name] = {{"H", m.hit_rate},
                         {"R", m.refresh_rate},
                         {"E", m.error_rate},
                         {"inference_fraction", m.inference_fraction},
                         {"H_std", m.hit_rate_std},
                         {"R_std", m.refresh_rate_std},
                         {"E_std", m.error_rate_std}};
  }
  auto js = open_out(dir / "metrics.json");
  js << json{{"runs", out}, {"means", means}}.dump(2) << '\n';
  std::cout << "wrote " << (dir / "metrics.csv").string()
            << " and metrics.json (" << reports.size() << " runs)\n";

  if (exp.model_validation) {
    if (!exp.source.workload || !cfg.contains("model")) {
      throw ConfigError(
          "model_validation needs a synthetic workload and a 'model' section");
    }
    const WorkloadSpec& spec = *exp.source.workload;
    const json& mj = cfg.at("model");
    std::size_t K = mj.at("capacity").get<std::size_t>();
    double beta = mj.at("beta").get<double>();
    double tol = cfg.value("validation_tol", 0.02);

    TraceGenerator probe(spec);
    std::vector<std::vector<double>> mixtures(spec.key_count);
    for (std::size_t i = 0; i < spec.key_count; ++i) {
      mixtures[i] = probe.mixture_of(i);
    }
    const auto& first = exp.caches.front();
    bool ideal = first.cache.replacement == Replacement::Ideal;
    auto rep = model::build_report(probe.popularity(), mixtures, K, beta,
                                   !ideal);
    const json& m = means.at(first.name);
    std::vector<harness::MetricPair> pairs;
    if (ideal) {
      pairs = {{"H", m.at("H"), rep.hit_rate_ideal},
               {"R", m.at("R"), rep.refresh_rate_ideal},
               {"E", m.at("E"), rep.error_rate_ideal}};
    } else {
      pairs = {{"H", m.at("H"), rep.hit_rate_lru},
               {"inference_fraction", m.at("inference_fraction"),
                rep.inference_fraction_lru},
               {"E", m.at("E"), rep.error_rate_lru}};
    }
    auto rows = harness::validate(pairs, tol);
    harness::print_validation(std::cout, rows);
    return harness::all_pass(rows) ? 0 : 1;
  }
  return 0;
}

int cmd_model(const std::string& config_path, const std::string& out_dir) {
  json cfg = load_json(config_path);
  WorkloadSpec spec = parse_workload(cfg.at("workload"));
  const json& mj = cfg.at("model");
  std::size_t K = mj.at("capacity").get<std::size_t>();
  double beta = mj.at("beta").get<double>();
  bool lru_numeric = mj.value("lru_numeric", false);

  TraceGenerator probe(spec);
  std::vector<std::vector<double>> mixtures(spec.key_count);
  for (std::size_t i = 0; i < spec.key_count; ++i) {
    mixtures[i] = probe.mixture_of(i);
  }
  auto rep =
      model::build_report(probe.popularity(), mixtures, K, beta, lru_numeric);

  auto dir = prepare_dir(out_dir);
  auto csv = open_out(dir / "model_keys.csv");
  csv << "key,q,h_lru,e_nc,r_ideal,e_ideal,r_lru,e_lru\n";
  for (std::size_t i = 0; i < rep.q.size(); ++i) {
    csv << i << ',' << rep.q[i] << ',' << rep.h_lru[i] << ',' << rep.e_nc[i]
        << ',' << rep.ideal[i].refresh << ',' << rep.ideal[i].error << ',';
    if (!rep.lru.empty()) {
      csv << rep.lru[i].refresh << ',' << rep.lru[i].error;
    } else {
      csv << ',';
    }
    csv << '\n';
  }

  json summary{{"t_c", rep.t_c},
               {"K", rep.capacity},
               {"beta", rep.beta},
               {"H_lru", rep.hit_rate_lru},
               {"H_ideal", rep.hit_rate_ideal},
               {"E_nc_lru", rep.e_nc_lru},
               {"E_nc_ideal", rep.e_nc_ideal},
               {"R_ideal", rep.refresh_rate_ideal},
               {"E_ideal", rep.error_rate_ideal},
               {"inference_fraction_ideal", rep.inference_fraction_ideal}};
  if (!rep.lru.empty()) {
    summary["inference_fraction_lru"] = rep.inference_fraction_lru;
    summary["E_lru"] = rep.error_rate_lru;
  }
  auto js = open_out(dir / "model_summary.json");
  js << summary.dump(2) << '\n';
  std::cout << "wrote model_keys.csv and model_summary.json (t_c=" << rep.t_c
            << ")\n";
  return 0;
}

int cmd_validate(const std::string& sim_path, const std::string& model_path,
                 const std::string& cache_name, const std::string& policy,
                 double tol) {
  json sim = load_json(sim_path);
  json mod = load_json(model_path);
  const json& means = sim.at("means");
  std::string name = cache_name;
  if (name.empty()) name = means.begin().key();
  if (!means.contains(name)) {
    throw ConfigError("cache '" + name + "' not present in " + sim_path);
  }
  const json& m = means.at(name);

  std::vector<harness::MetricPair> pairs;
  if (policy == "ideal") {
    pairs.push_back({"H", m.at("H"), mod.at("H_ideal")});
    pairs.push_back({"R", m.at("R"), mod.at("R_ideal")});
    pairs.push_back({"E", m.at("E"), mod.at("E_ideal")});
  } else if (policy == "lru") {
    pairs.push_back({"H", m.at("H"), mod.at("H_lru")});
    if (mod.contains("inference_fraction_lru")) {
      pairs.push_back({"inference_fraction", m.at("inference_fraction"),
                       mod.at("inference_fraction_lru")});
      pairs.push_back({"E", m.at("E"), mod.at("E_lru")});
    }
  } else {
    throw ConfigError("policy must be 'ideal' or 'lru'");
  }
  auto rows = harness::validate(pairs, tol);
  harness::print_validation(std::cout, rows);
  return harness::all_pass(rows) ? 0 : 1;
}

int cmd_bench(const std::vector<std::size_t>& k_values,
              const std::vector<std::string>& paradigms,
              const std::string& approx_text, std::size_t queries,
              std::uint64_t seed, const std::string& out_dir) {
  std::vector<harness::BenchSetup> setups;
  for (const auto& p : paradigms) {
    harness::BenchSetup s;
    s.name = p;
    if (p == "exact") {
      s.paradigm = harness::Paradigm::Exact;
    } else if (p == "approx_key") {
      s.paradigm = harness::Paradigm::ApproxKey;
      s.approx = ApproxFn::parse(approx_text);
    } else if (p == "similarity_linear") {
      s.paradigm = harness::Paradigm::Similarity;
      s.index = IndexKind::LinearScan;
    } else if (p == "similarity_tree") {
      s.paradigm = harness::Paradigm::Similarity;
      s.index = IndexKind::PartitionTree;
    } else {
      throw ConfigError("unknown bench paradigm '" + p + "'");
    }
    setups.push_back(std::move(s));
  }
  auto rows = harness::bench_lookup(k_values, setups, queries, seed);
  auto dir = prepare_dir(out_dir);
  auto csv = open_out(dir / "bench.csv");
  csv << "paradigm,K,median_us,p99_us,ratio_vs_exact\n";
  for (const auto& r : rows) {
    csv << r.paradigm << ',' << r.capacity << ',' << r.median_us << ','
        << r.p99_us << ',' << r.ratio_vs_exact << '\n';
    std::cout << r.paradigm << " K=" << r.capacity << " median=" << r.median_us
              << "us p99=" << r.p99_us << "us ratio=" << r.ratio_vs_exact
              << "\n";
  }
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out_dir,
                std::uint64_t seed_override, bool has_seed) {
  json cfg = load_json(config_path);
  harness::ExperimentConfig exp = parse_experiment(cfg);
  if (has_seed) exp.seeds = {seed_override};
  auto rows = harness::compare_accuracy(exp);
  auto dir = prepare_dir(out_dir);
  auto csv = open_out(dir / "accuracy.csv");
  csv << "cache,correct_hits,error_hits,misses\n";
  for (const auto& r : rows) {
    csv << r.cache_name << ',' << r.correct_hit_frac << ',' << r.error_hit_frac
        << ',' << r.miss_frac << '\n';
    std::cout << r.cache_name << ": correct=" << r.correct_hit_frac
              << " errors=" << r.error_hit_frac << " misses=" << r.miss_frac
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"approximate-key caching toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", trace_path, format = "csv";
  std::string approx_text = "identity", out_name, cache_name, policy = "ideal";
  std::string sim_path, model_path;
  std::uint64_t seed = 0;
  std::size_t top_m = 10000, queries = 2000;
  double tol = 0.02;
  std::vector<std::size_t> k_values = {1000, 10000};
  std::vector<std::string> paradigms = {"exact", "approx_key",
                                        "similarity_linear"};

  auto* gen = app.add_subcommand("generate", "workload spec -> trace file");
  gen->add_option("--config", config_path)->required();
  auto* gen_seed = gen->add_option("--seed", seed);
  gen->add_option("--output-dir", out_dir);
  gen->add_option("--format", format)->check(CLI::IsMember({"csv", "jsonl"}));
  gen->add_option("--out", out_name);

  auto* st = app.add_subcommand("stats", "trace + approx fn -> skew CSVs");
  st->add_option("--trace", trace_path)->required();
  st->add_option("--format", format)->check(CLI::IsMember({"csv", "jsonl"}));
  st->add_option("--approx", approx_text);
  st->add_option("--top-m", top_m);
  st->add_option("--output-dir", out_dir);
  st->add_option("--seed", seed);  // accepted for interface uniformity

  auto* si = app.add_subcommand("simulate", "config -> metrics CSV/JSON");
  si->add_option("--config", config_path)->required();
  auto* si_seed = si->add_option("--seed", seed);
  si->add_option("--output-dir", out_dir);

  auto* mo = app.add_subcommand("model", "workload spec -> model report");
  mo->add_option("--config", config_path)->required();
  mo->add_option("--output-dir", out_dir);
  mo->add_option("--seed", seed);

  auto* va = app.add_subcommand("validate", "sim vs model, nonzero exit on fail");
  va->add_option("--sim", sim_path)->required();
  va->add_option("--model", model_path)->required();
  va->add_option("--cache", cache_name);
  va->add_option("--policy", policy)->check(CLI::IsMember({"ideal", "lru"}));
  va->add_option("--tol", tol);
  va->add_option("--seed", seed);
  va->add_option("--output-dir", out_dir);

  auto* be = app.add_subcommand("bench", "lookup latency table");
  be->add_option("--k-values", k_values)->delimiter(',');
  be->add_option("--paradigms", paradigms)->delimiter(',');
  be->add_option("--approx", approx_text);
  be->add_option("--queries", queries);
  be->add_option("--seed", seed);
  be->add_option("--output-dir", out_dir);

  auto* co = app.add_subcommand("compare", "accuracy breakdown per cache");
  co->add_option("--config", config_path)->required();
  auto* co_seed = co->add_option("--seed", seed);
  co->add_option("--output-dir", out_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_generate(config_path, out_dir, seed, gen_seed->count() > 0,
                          format, out_name);
    }
    if (st->parsed()) {
      return cmd_stats(trace_path, format, approx_text, top_m, out_dir);
    }
    if (si->parsed()) {
      return cmd_simulate(config_path, out_dir, seed, si_seed->count() > 0);
    }
    if (mo->parsed()) return cmd_model(config_path, out_dir);
    if (va->parsed()) {
      return cmd_validate(sim_path, model_path, cache_name, policy, tol);
    }
    if (be->parsed()) {
      return cmd_bench(k_values, paradigms, approx_text, queries,
                       seed ? seed : 1, out_dir);
    }
    if (co->parsed()) {
      return cmd_compare(config_path, out_dir, seed, co_seed->count() > 0);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
