#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "akcache/error.hpp"
#include "akcache/workload.hpp"

using namespace akcache;

namespace {

WorkloadSpec base_spec() {
  WorkloadSpec spec;
  spec.key_count = 100;
  spec.popularity.kind = PopularityKind::Uniform;
  spec.mixture.kind = MixtureKind::SingleClass;
  spec.class_count = 10;
  spec.arrivals = 1000;
  spec.seed = 7;
  return spec;
}

std::vector<TraceRecord> collect(const WorkloadSpec& spec) {
  TraceGenerator gen(spec);
  std::vector<TraceRecord> out;
  while (!gen.done()) out.push_back(gen.next());
  return out;
}

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const char* name)
      : path(std::filesystem::temp_directory_path() / name) {}
  ~TempFile() { std::filesystem::remove(path); }
};

bool records_equal(const std::vector<TraceRecord>& a,
                   const std::vector<TraceRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].flow_id != b[i].flow_id || a[i].key_index != b[i].key_index ||
        a[i].input != b[i].input || a[i].true_label != b[i].true_label) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("degenerate single-key workload") {
  WorkloadSpec spec = base_spec();
  spec.key_count = 1;
  spec.mixture.kind = MixtureKind::UniformClasses;
  spec.mixture.m = 3;
  for (const auto& rec : collect(spec)) {
    CHECK(rec.key_index == 0);
    CHECK(rec.true_label >= 0);
    CHECK(rec.true_label < 3);
  }
}

TEST_CASE("zipf alpha=0 is uniform within multinomial bounds") {
  WorkloadSpec spec = base_spec();
  spec.popularity.kind = PopularityKind::Zipf;
  spec.popularity.alpha = 0.0;
  spec.arrivals = 1000000;
  std::vector<std::uint64_t> counts(spec.key_count, 0);
  TraceGenerator gen(spec);
  while (!gen.done()) ++counts[gen.next().key_index];
  const double p = 1.0 / spec.key_count;
  const double sigma = std::sqrt(p * (1 - p) / spec.arrivals);
  for (auto c : counts) {
    double q_hat = static_cast<double>(c) / spec.arrivals;
    CHECK(std::abs(q_hat - p) <= 5.0 * sigma);
  }
}

TEST_CASE("dominant mixture concentrates on the modal class") {
  WorkloadSpec spec = base_spec();
  spec.key_count = 10;
  spec.mixture.kind = MixtureKind::Dominant;
  spec.mixture.p_max = 0.8;
  spec.mixture.m = 3;
  spec.arrivals = 1000000;
  TraceGenerator gen(spec);
  std::vector<std::uint64_t> arrivals(10, 0), modal(10, 0);
  TraceGenerator probe(spec);
  while (!gen.done()) {
    const TraceRecord& rec = gen.next();
    ++arrivals[rec.key_index];
    modal[rec.key_index] += rec.true_label == probe.label_of(rec.key_index, 0);
  }
  for (std::size_t i = 0; i < 10; ++i) {
    REQUIRE(arrivals[i] >= 90000);  // ~1e5 each
    double p_hat = static_cast<double>(modal[i]) / arrivals[i];
    CHECK(p_hat >= 0.79);
    CHECK(p_hat <= 0.81);
  }
}

TEST_CASE("popularity law is exposed and normalized") {
  WorkloadSpec spec = base_spec();
  spec.popularity.kind = PopularityKind::Zipf;
  spec.popularity.alpha = 1.0;
  TraceGenerator gen(spec);
  const auto& q = gen.popularity();
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    sum += q[i];
    if (i) CHECK(q[i] <= q[i - 1]);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gen.mixture_of(0) == std::vector<double>{1.0});
}

TEST_CASE("generation is reproducible and files are byte-identical") {
  WorkloadSpec spec = base_spec();
  spec.noise_elements = 5;
  spec.mixture.kind = MixtureKind::Dominant;
  spec.mixture.p_max = 0.6;
  spec.mixture.m = 2;
  CHECK(records_equal(collect(spec), collect(spec)));

  TempFile a("akc_trace_a.csv"), b("akc_trace_b.csv");
  write_trace(spec, a.path.string(), TraceFormat::Csv);
  write_trace(spec, b.path.string(), TraceFormat::Csv);
  std::ifstream fa(a.path, std::ios::binary), fb(b.path, std::ios::binary);
  std::string ca((std::istreambuf_iterator<char>(fa)), {});
  std::string cb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(ca == cb);
  CHECK(ca.substr(0, 24) == "flow_id,key_index,label,");
}

TEST_CASE("trace round-trips through both formats") {
  WorkloadSpec spec = base_spec();
  spec.noise_elements = 3;
  spec.mixture.kind = MixtureKind::UniformClasses;
  spec.mixture.m = 4;
  auto original = collect(spec);

  for (auto fmt : {TraceFormat::Csv, TraceFormat::JsonLines}) {
    TempFile f(fmt == TraceFormat::Csv ? "akc_rt.csv" : "akc_rt.jsonl");
    write_trace(spec, f.path.string(), fmt);
    IngestSummary summary;
    auto loaded = read_trace(f.path.string(), fmt, &summary);
    CHECK(summary.rows_malformed == 0);
    CHECK(summary.rows_ok == spec.arrivals);
    CHECK(records_equal(original, loaded));
  }
}

TEST_CASE("ingest handles empty and malformed input") {
  TempFile empty("akc_empty.csv");
  std::ofstream(empty.path).close();
  IngestSummary summary;
  auto rows = read_trace(empty.path.string(), TraceFormat::Csv, &summary);
  CHECK(rows.empty());
  CHECK(summary.rows_ok == 0);
  CHECK(summary.rows_malformed == 0);

  CHECK_THROWS_AS(read_trace("/nonexistent/trace.csv", TraceFormat::Csv),
                  IoError);

  // a row with 101 packets is malformed but skipped
  TempFile f("akc_bad.csv");
  {
    WorkloadSpec spec = base_spec();
    spec.arrivals = 200;
    write_trace(spec, f.path.string(), TraceFormat::Csv);
    std::ofstream os(f.path, std::ios::app);
    os << "200,0,1,101";
    for (int i = 0; i < 100; ++i) os << ",1";
    os << "\n";
  }
  auto ok = read_trace(f.path.string(), TraceFormat::Csv, &summary);
  CHECK(ok.size() == 200);
  CHECK(summary.rows_malformed == 1);

  // more than 1% malformed is a hard error
  TempFile g("akc_rotten.csv");
  {
    WorkloadSpec spec = base_spec();
    spec.arrivals = 50;
    write_trace(spec, g.path.string(), TraceFormat::Csv);
    std::ofstream os(g.path, std::ios::app);
    os << "not,a,row\n";
  }
  CHECK_THROWS_AS(read_trace(g.path.string(), TraceFormat::Csv), ConfigError);
}

TEST_CASE("string labels map to dense first-seen ids") {
  TempFile f("akc_labels.jsonl");
  {
    std::ofstream os(f.path);
    os << R"({"flow_id":0,"label":"dns","packets":[1,2]})" << "\n";
    os << R"({"flow_id":1,"label":"quic","packets":[3]})" << "\n";
    os << R"({"flow_id":2,"label":"dns","packets":[5,6,7]})" << "\n";
  }
  IngestSummary summary;
  auto rows = read_trace(f.path.string(), TraceFormat::JsonLines, &summary);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].true_label == 0);
  CHECK(rows[1].true_label == 1);
  CHECK(rows[2].true_label == 0);
  CHECK(rows[0].key_index == -1);
  REQUIRE(summary.labels.size() == 2);
  CHECK(summary.labels[0].first == "dns");
  CHECK(summary.labels[1].first == "quic");
}

TEST_CASE("stats: identity recovers the popularity law") {
  WorkloadSpec spec = base_spec();
  spec.popularity.kind = PopularityKind::Zipf;
  spec.popularity.alpha = 1.0;
  spec.key_count = 20;
  spec.arrivals = 200000;
  auto trace = collect(spec);
  TraceGenerator probe(spec);
  auto stats = compute_stats(trace, ApproxFn::identity(), 20);
  CHECK(stats.total == spec.arrivals);
  CHECK(stats.distinct_keys <= 20);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(stats.by_rank[r].q_hat ==
          doctest::Approx(probe.popularity()[r]).epsilon(0.05));
  }
}

TEST_CASE("stats: a constant transform collapses everything onto one key") {
  WorkloadSpec spec = base_spec();
  spec.key_count = 50;
  spec.mixture.kind = MixtureKind::Dominant;
  spec.mixture.p_max = 0.7;
  spec.mixture.m = 2;
  spec.arrivals = 20000;
  auto trace = collect(spec);
  auto constant_fn =
      ApproxFn::compose({ApproxFn::prefix(1), ApproxFn::quantize(1000000)});
  auto stats = compute_stats(trace, constant_fn, 10);
  REQUIRE(stats.distinct_keys == 1);
  CHECK(stats.by_rank[0].q_hat == doctest::Approx(1.0));
  // modal label share of the pooled trace
  std::uint64_t top = 0, total = 0;
  std::map<ClassLabel, std::uint64_t> counts;
  for (const auto& rec : trace) ++counts[rec.true_label];
  for (const auto& [label, c] : counts) {
    top = std::max(top, c);
    total += c;
  }
  CHECK(stats.by_rank[0].max_p_hat ==
        doctest::Approx(static_cast<double>(top) / total));
}

TEST_CASE("stats: coarser prefixes merge keys and raise the top bucket") {
  WorkloadSpec spec = base_spec();
  spec.key_count = 300;
  spec.popularity.kind = PopularityKind::Zipf;
  spec.popularity.alpha = 0.9;
  spec.arrivals = 30000;
  spec.noise_elements = 2;
  auto trace = collect(spec);

  std::size_t prev_distinct = 0;
  for (int n : {1, 2, 4, 6}) {  // prefix_a vs prefix_b with a < b
    auto s = compute_stats(trace, ApproxFn::prefix(n), 10);
    if (n > 1) CHECK(s.distinct_keys >= prev_distinct);
    prev_distinct = s.distinct_keys;
  }

  auto ident = compute_stats(trace, ApproxFn::identity(), 10);
  auto pfx = compute_stats(trace, ApproxFn::prefix(4), 10);
  CHECK(pfx.by_rank[0].count >= ident.by_rank[0].count);

  // conservation: label histogram counts sum to the trace length
  for (const auto* s : {&ident, &pfx}) {
    std::uint64_t total = 0;
    for (const auto& ks : s->by_rank) {
      for (const auto& [label, c] : ks.label_histogram) total += c;
    }
    CHECK(total == trace.size());
  }
}

TEST_CASE("workload validation") {
  WorkloadSpec spec = base_spec();
  spec.mixture.kind = MixtureKind::Dominant;
  spec.mixture.p_max = 0.2;  // below 1/m
  spec.mixture.m = 3;
  CHECK_THROWS_AS(TraceGenerator{spec}, ConfigError);
  spec = base_spec();
  spec.key_count = 0;
  CHECK_THROWS_AS(TraceGenerator{spec}, ConfigError);
  spec = base_spec();
  spec.noise_elements = 97;  // 4 + 97 > 100
  CHECK_THROWS_AS(TraceGenerator{spec}, ConfigError);
  spec = base_spec();
  spec.popularity.kind = PopularityKind::Explicit;
  spec.popularity.q = {0.2, 0.8};  // increasing
  spec.key_count = 2;
  CHECK_THROWS_AS(TraceGenerator{spec}, ConfigError);
}
