#include "akcache/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "akcache/error.hpp"

#include <json.hpp>

namespace akcache {

namespace {

constexpr int kKeyDigits = 4;
constexpr int kMaxPackets = 100;
constexpr std::int32_t kMaxPacketSize = 65535;
constexpr std::int32_t kNoiseRange = 1500;

}  // namespace

TraceGenerator::TraceGenerator(const WorkloadSpec& spec)
    : TraceGenerator(spec, spec.seed) {}

TraceGenerator::TraceGenerator(const WorkloadSpec& spec,
                               std::uint64_t seed_override)
    : spec_(spec), rng_(seed_override) {
  spec_.seed = seed_override;
  validate();

  const std::size_t n = spec_.key_count;
  q_.resize(n);
  switch (spec_.popularity.kind) {
    case PopularityKind::Uniform:
      std::fill(q_.begin(), q_.end(), 1.0 / static_cast<double>(n));
      break;
    case PopularityKind::Zipf: {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        q_[i] = std::pow(static_cast<double>(i + 1), -spec_.popularity.alpha);
        sum += q_[i];
      }
      for (auto& v : q_) v /= sum;
      break;
    }
    case PopularityKind::Explicit: {
      if (spec_.popularity.q.size() != n) {
        throw ConfigError("explicit popularity size must equal key_count");
      }
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double v = spec_.popularity.q[i];
        if (v < 0.0) throw ConfigError("popularity entries must be >= 0");
        if (i > 0 && v > q_[i - 1] + 1e-15) {
          throw ConfigError("explicit popularity must be non-increasing");
        }
        q_[i] = v;
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("explicit popularity must sum to 1");
      }
      for (auto& v : q_) v /= sum;
      break;
    }
  }
  q_cdf_.resize(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += q_[i];
    q_cdf_[i] = acc;
  }
  q_cdf_.back() = 1.0;

  if (spec_.mixture.kind == MixtureKind::Explicit) {
    explicit_cdf_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = spec_.mixture.p[i];
      double s = 0.0;
      explicit_cdf_[i].resize(p.size());
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j] < 0.0) throw ConfigError("mixture entries must be >= 0");
        s += p[j];
        explicit_cdf_[i][j] = s;
      }
      if (std::abs(s - 1.0) > 1e-9) {
        throw ConfigError("mixture of key " + std::to_string(i) +
                          " must sum to 1");
      }
      explicit_cdf_[i].back() = 1.0;
    }
  }

  rec_.input.resize(kKeyDigits + spec_.noise_elements);
}

void TraceGenerator::validate() const {
  if (spec_.key_count < 1) throw ConfigError("key_count must be >= 1");
  if (spec_.arrivals < 1) throw ConfigError("arrivals must be >= 1");
  if (spec_.class_count < 1) throw ConfigError("class_count must be >= 1");
  if (spec_.noise_elements < 0 ||
      kKeyDigits + spec_.noise_elements > kMaxPackets) {
    throw ConfigError("noise_elements out of range");
  }
  const auto& mx = spec_.mixture;
  switch (mx.kind) {
    case MixtureKind::SingleClass:
      break;
    case MixtureKind::UniformClasses:
      if (mx.m < 1 || mx.m > spec_.class_count) {
        throw ConfigError("uniform mixture m out of range");
      }
      break;
    case MixtureKind::Dominant:
      if (mx.m < 2 || mx.m > spec_.class_count) {
        throw ConfigError("dominant mixture m out of range");
      }
      if (!(mx.p_max > 1.0 / mx.m) || mx.p_max > 1.0) {
        throw ConfigError("dominant p_max must lie in (1/m, 1]");
      }
      break;
    case MixtureKind::Explicit:
      if (mx.p.size() != spec_.key_count) {
        throw ConfigError("explicit mixture count must equal key_count");
      }
      for (const auto& p : mx.p) {
        if (p.empty() || static_cast<int>(p.size()) > spec_.class_count) {
          throw ConfigError("explicit mixture size out of range");
        }
      }
      break;
  }
  if (spec_.popularity.kind == PopularityKind::Zipf &&
      spec_.popularity.alpha < 0.0) {
    throw ConfigError("zipf alpha must be >= 0");
  }
}

ClassLabel TraceGenerator::label_of(std::size_t key, int slot) const {
  return static_cast<ClassLabel>((key + static_cast<std::size_t>(slot)) %
                                 static_cast<std::size_t>(spec_.class_count));
}

std::vector<double> TraceGenerator::mixture_of(std::size_t key) const {
  switch (spec_.mixture.kind) {
    case MixtureKind::SingleClass:
      return {1.0};
    case MixtureKind::UniformClasses:
      return std::vector<double>(spec_.mixture.m, 1.0 / spec_.mixture.m);
    case MixtureKind::Dominant: {
      std::vector<double> p(spec_.mixture.m,
                            (1.0 - spec_.mixture.p_max) /
                                static_cast<double>(spec_.mixture.m - 1));
      p[0] = spec_.mixture.p_max;
      return p;
    }
    case MixtureKind::Explicit:
      return spec_.mixture.p[key];
  }
  return {1.0};
}

std::size_t TraceGenerator::sample_key() {
  double u = rng_.next_double();
  auto it = std::upper_bound(q_cdf_.begin(), q_cdf_.end(), u);
  if (it == q_cdf_.end()) --it;
  return static_cast<std::size_t>(it - q_cdf_.begin());
}

int TraceGenerator::sample_slot(std::size_t key) {
  switch (spec_.mixture.kind) {
    case MixtureKind::SingleClass:
      return 0;
    case MixtureKind::UniformClasses:
      return static_cast<int>(rng_.next_index(spec_.mixture.m));
    case MixtureKind::Dominant: {
      if (rng_.next_double() < spec_.mixture.p_max) return 0;
      return 1 + static_cast<int>(rng_.next_index(spec_.mixture.m - 1));
    }
    case MixtureKind::Explicit: {
      const auto& cdf = explicit_cdf_[key];
      double u = rng_.next_double();
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      return static_cast<int>(it - cdf.begin());
    }
  }
  return 0;
}

const TraceRecord& TraceGenerator::next() {
  const std::size_t key = sample_key();
  rec_.flow_id = static_cast<std::int64_t>(produced_);
  rec_.key_index = static_cast<std::int64_t>(key);
  for (int d = 0; d < kKeyDigits; ++d) {
    rec_.input[d] = static_cast<std::int32_t>((key >> (8 * d)) & 0xff);
  }
  for (int t = 0; t < spec_.noise_elements; ++t) {
    rec_.input[kKeyDigits + t] =
        static_cast<std::int32_t>(rng_.next_int(-kNoiseRange, kNoiseRange));
  }
  rec_.true_label = label_of(key, sample_slot(key));
  ++produced_;
  return rec_;
}

namespace {

void write_csv_record(std::ostream& os, const TraceRecord& rec) {
  os << rec.flow_id << ',' << rec.key_index << ',' << rec.true_label << ','
     << rec.input.size();
  for (std::size_t i = 0; i < static_cast<std::size_t>(kMaxPackets); ++i) {
    os << ',';
    if (i < rec.input.size()) os << rec.input[i];
  }
  os << '\n';
}

void write_jsonl_record(std::ostream& os, const TraceRecord& rec) {
  os << "{\"flow_id\":" << rec.flow_id << ",\"key_index\":" << rec.key_index
     << ",\"label\":\"" << rec.true_label << "\",\"len\":" << rec.input.size()
     << ",\"packets\":[";
  for (std::size_t i = 0; i < rec.input.size(); ++i) {
    if (i) os << ',';
    os << rec.input[i];
  }
  os << "]}\n";
}

}  // namespace

void write_trace(const WorkloadSpec& spec, const std::string& path,
                 TraceFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  if (format == TraceFormat::Csv) {
    os << "flow_id,key_index,label,len";
    for (int i = 1; i <= kMaxPackets; ++i) os << ",p" << i;
    os << '\n';
  }
  TraceGenerator gen(spec);
  while (!gen.done()) {
    const TraceRecord& rec = gen.next();
    if (format == TraceFormat::Csv) {
      write_csv_record(os, rec);
    } else {
      write_jsonl_record(os, rec);
    }
  }
  if (!os) throw IoError("write to " + path + " failed");
}

namespace {

class LabelMapper {
 public:
  ClassLabel map(const std::string& name) {
    auto it = by_name_.find(name);
    if (it != by_name_.end()) return it->second;
    ClassLabel id;
    std::int64_t numeric;
    auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(),
                                     numeric);
    if (ec == std::errc() && ptr == name.data() + name.size() &&
        numeric >= 0 && numeric < (1LL << 31)) {
      id = static_cast<ClassLabel>(numeric);
    } else {
      while (used_.count(next_)) ++next_;
      id = next_++;
    }
    used_.insert(id);
    by_name_.emplace(name, id);
    ordered_.emplace_back(name, id);
    return id;
  }

  std::vector<std::pair<std::string, ClassLabel>> take() {
    return std::move(ordered_);
  }

 private:
  std::unordered_map<std::string, ClassLabel> by_name_;
  std::unordered_set<ClassLabel> used_;
  ClassLabel next_ = 0;
  std::vector<std::pair<std::string, ClassLabel>> ordered_;
};

bool parse_i64(std::string_view s, std::int64_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_csv_row(const std::string& line, LabelMapper& labels,
                   TraceRecord& rec) {
  std::vector<std::string_view> cells;
  cells.reserve(4 + kMaxPackets);
  std::size_t pos = 0;
  std::string_view sv(line);
  while (true) {
    std::size_t comma = sv.find(',', pos);
    if (comma == std::string_view::npos) {
      cells.push_back(sv.substr(pos));
      break;
    }
    cells.push_back(sv.substr(pos, comma - pos));
    pos = comma + 1;
  }
  if (cells.size() != 4 + kMaxPackets) return false;

  std::int64_t flow_id, key_index = -1, len;
  if (!parse_i64(cells[0], flow_id)) return false;
  if (!cells[1].empty() && !parse_i64(cells[1], key_index)) return false;
  if (cells[2].empty()) return false;
  if (!parse_i64(cells[3], len) || len < 1 || len > kMaxPackets) return false;

  rec.input.clear();
  for (std::int64_t i = 0; i < len; ++i) {
    std::int64_t v;
    if (!parse_i64(cells[4 + i], v) || std::abs(v) > kMaxPacketSize) {
      return false;
    }
    rec.input.push_back(static_cast<std::int32_t>(v));
  }
  for (std::size_t i = 4 + len; i < cells.size(); ++i) {
    if (!cells[i].empty()) return false;
  }
  rec.flow_id = flow_id;
  rec.key_index = key_index;
  rec.true_label = labels.map(std::string(cells[2]));
  return true;
}

bool parse_jsonl_row(const std::string& line, LabelMapper& labels,
                     TraceRecord& rec) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return false;
  if (!j.contains("flow_id") || !j["flow_id"].is_number_integer()) return false;
  if (!j.contains("label") || !j["label"].is_string()) return false;
  if (!j.contains("packets") || !j["packets"].is_array()) return false;
  const auto& packets = j["packets"];
  if (packets.empty() || packets.size() > kMaxPackets) return false;
  if (j.contains("len") && j["len"].get<std::int64_t>() !=
                               static_cast<std::int64_t>(packets.size())) {
    return false;
  }
  rec.input.clear();
  for (const auto& v : packets) {
    if (!v.is_number_integer()) return false;
    std::int64_t x = v.get<std::int64_t>();
    if (std::abs(x) > kMaxPacketSize) return false;
    rec.input.push_back(static_cast<std::int32_t>(x));
  }
  rec.flow_id = j["flow_id"].get<std::int64_t>();
  rec.key_index = j.contains("key_index") && j["key_index"].is_number_integer()
                      ? j["key_index"].get<std::int64_t>()
                      : -1;
  rec.true_label = labels.map(j["label"].get<std::string>());
  return true;
}

}  // namespace

std::vector<TraceRecord> read_trace(const std::string& path,
                                    TraceFormat format,
                                    IngestSummary* summary) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);

  std::vector<TraceRecord> out;
  LabelMapper labels;
  IngestSummary sum;
  std::string line;
  bool first = true;
  TraceRecord rec;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (format == TraceFormat::Csv && first) {
      first = false;
      if (line.rfind("flow_id,", 0) == 0) continue;  // header
    }
    if (line.empty()) continue;
    bool ok = format == TraceFormat::Csv ? parse_csv_row(line, labels, rec)
                                         : parse_jsonl_row(line, labels, rec);
    if (ok) {
      ++sum.rows_ok;
      out.push_back(rec);
    } else {
      ++sum.rows_malformed;
    }
  }
  sum.labels = labels.take();
  const std::uint64_t total = sum.rows_ok + sum.rows_malformed;
  if (total > 0 && sum.rows_malformed * 100 > total) {
    throw ConfigError("more than 1% of rows malformed in " + path + " (" +
                      std::to_string(sum.rows_malformed) + "/" +
                      std::to_string(total) + ")");
  }
  if (summary) *summary = std::move(sum);
  return out;
}

TraceStats compute_stats(const std::vector<TraceRecord>& trace,
                         const ApproxFn& approx, std::size_t top_m) {
  struct Agg {
    std::uint64_t count = 0;
    std::unordered_map<ClassLabel, std::uint64_t> labels;
  };
  std::unordered_map<ApproxKey, Agg> agg;
  for (const auto& rec : trace) {
    Agg& a = agg[approx(rec.input)];
    ++a.count;
    ++a.labels[rec.true_label];
  }

  TraceStats stats;
  stats.total = trace.size();
  stats.distinct_keys = agg.size();
  stats.by_rank.reserve(agg.size());
  for (auto& [key, a] : agg) {
    KeyStat ks;
    ks.key = key;
    ks.count = a.count;
    ks.q_hat = static_cast<double>(a.count) / static_cast<double>(stats.total);
    std::uint64_t top = 0;
    for (const auto& [label, c] : a.labels) {
      ks.label_histogram.emplace_back(label, c);
      top = std::max(top, c);
    }
    std::sort(ks.label_histogram.begin(), ks.label_histogram.end());
    ks.max_p_hat = static_cast<double>(top) / static_cast<double>(a.count);
    stats.by_rank.push_back(std::move(ks));
  }
  std::sort(stats.by_rank.begin(), stats.by_rank.end(),
            [](const KeyStat& a, const KeyStat& b) {
              if (a.count != b.count) return a.count > b.count;
              return a.key.bytes() < b.key.bytes();
            });
  const std::size_t m = std::min(top_m, stats.by_rank.size());
  stats.dominant_prevalence.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    stats.dominant_prevalence.push_back(stats.by_rank[i].max_p_hat);
  }
  return stats;
}

}  // namespace akcache
