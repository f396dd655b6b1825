#include "akcache/cache.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "akcache/error.hpp"

namespace akcache {

namespace {
constexpr std::uint64_t kToServeCap = 1ULL << 62;
}

std::uint64_t floor_pow(double beta, std::uint32_t k) {
  double p = std::pow(beta, static_cast<double>(k));
  if (!(p < static_cast<double>(kToServeCap))) return kToServeCap;
  return static_cast<std::uint64_t>(std::floor(p));
}

std::int64_t phi_index(double beta, std::uint32_t n) {
  std::uint64_t grown = floor_pow(beta, n - 1);
  return static_cast<std::int64_t>(std::max<std::uint64_t>(n, grown));
}

std::vector<std::int64_t> verification_indices(double beta, ScheduleMode mode,
                                               int count) {
  if (!(beta > 1.0)) {
    throw ConfigError("back-off beta must be > 1");
  }
  if (count < 1) {
    throw ConfigError("verification index count must be >= 1");
  }
  std::vector<std::int64_t> out;
  out.reserve(count);
  if (mode == ScheduleMode::PhiSequence) {
    for (int n = 1; n <= count; ++n) {
      out.push_back(phi_index(beta, static_cast<std::uint32_t>(n)));
    }
    return out;
  }
  // algorithm1: insertion verifies on arrival 1 with to_serve = 0, so the
  // second verification lands on arrival 2; the k-th match sets to_serve =
  // floor(beta^k), giving v_{k+2} = v_{k+1} + floor(beta^k) + 1.
  std::int64_t v = 1;
  out.push_back(v);
  if (count >= 2) {
    v = 2;
    out.push_back(v);
  }
  for (int k = 1; static_cast<int>(out.size()) < count; ++k) {
    std::uint64_t gap = floor_pow(beta, static_cast<std::uint32_t>(k));
    v += static_cast<std::int64_t>(std::min(gap, kToServeCap)) + 1;
    out.push_back(v);
  }
  return out;
}

ApproxKeyCache::ApproxKeyCache(CacheConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.capacity == 0) {
    throw ConfigError("cache capacity must be positive");
  }
  if (cfg_.error_control == ErrorControl::AutoRefresh && !(cfg_.beta > 1.0)) {
    throw ConfigError("auto-refresh requires beta > 1");
  }
}

void ApproxKeyCache::set_popularity_ranks(
    std::unordered_map<ApproxKey, std::size_t> ranks) {
  ranks_ = std::move(ranks);
}

void ApproxKeyCache::reset_state(CacheEntryState& st) const {
  st.refreshed = 1;
  st.to_serve = 0;
  if (cfg_.schedule == ScheduleMode::PhiSequence) {
    std::int64_t gap = phi_index(cfg_.beta, 2) - 2;
    if (gap > 0) st.to_serve = static_cast<std::uint64_t>(gap);
  }
}

void ApproxKeyCache::advance_backoff(CacheEntryState& st) const {
  if (cfg_.schedule == ScheduleMode::Algorithm1) {
    st.to_serve = floor_pow(cfg_.beta, st.refreshed);
    if (st.refreshed < UINT32_MAX) ++st.refreshed;
    return;
  }
  // phi_sequence: this verification is inference number refreshed+1 at
  // arrival phi_n; schedule the next one on arrival phi_{n+1} exactly.
  std::uint32_t n = st.refreshed + 1;
  std::int64_t gap = phi_index(cfg_.beta, n + 1) - phi_index(cfg_.beta, n) - 1;
  st.to_serve = gap > 0 ? static_cast<std::uint64_t>(gap) : 0;
  st.refreshed = n;
}

void ApproxKeyCache::record_run(std::uint64_t length) {
  ++run_lengths_[length];
}

void ApproxKeyCache::insert_entry(ApproxKey key, ClassLabel label) {
  lru_.push_front(key);
  Entry e;
  e.st.label = label;
  reset_state(e.st);
  e.run_length = 1;
  e.lru_it = lru_.begin();
  map_.emplace(std::move(key), std::move(e));
}

ApproxKey ApproxKeyCache::evict_lru() {
  if (map_.size() != cfg_.capacity) {
    throw std::logic_error("evict_lru called on non-full cache");
  }
  ApproxKey victim = lru_.back();
  auto it = map_.find(victim);
  record_run(it->second.run_length);
  map_.erase(it);
  lru_.pop_back();
  return victim;
}

LookupOutcome ApproxKeyCache::lookup_and_maintain(const InputVector& x,
                                                  const Classifier& classify) {
  ApproxKey key = cfg_.approx(x);
  auto it = map_.find(key);
  if (it == map_.end()) {
    ClassLabel y = classify(x);
    if (cfg_.replacement == Replacement::Ideal) {
      auto rit = ranks_.find(key);
      if (rit == ranks_.end()) {
        throw ConfigError("ideal replacement: no popularity rank for key " +
                          key.hex());
      }
      if (rit->second <= cfg_.capacity) {
        insert_entry(std::move(key), y);
      }
    } else {
      if (map_.size() == cfg_.capacity) evict_lru();
      insert_entry(std::move(key), y);
    }
    return {y, OutcomeKind::MissInserted, true};
  }

  Entry& e = it->second;
  if (cfg_.replacement == Replacement::Lru) {
    lru_.splice(lru_.begin(), lru_, e.lru_it);
  }
  ++e.run_length;

  if (cfg_.error_control == ErrorControl::None) {
    return {e.st.label, OutcomeKind::HitServed, false};
  }
  if (e.st.to_serve > 0) {
    --e.st.to_serve;
    return {e.st.label, OutcomeKind::HitServed, false};
  }
  ClassLabel fresh = classify(x);
  if (fresh == e.st.label) {
    advance_backoff(e.st);
    return {e.st.label, OutcomeKind::HitVerifiedMatch, true};
  }
  // Mismatch: the run ends just before this arrival, which becomes the
  // first arrival (and identifying inference) of the next run.
  record_run(e.run_length - 1);
  e.run_length = 1;
  e.st.label = fresh;
  reset_state(e.st);
  return {fresh, OutcomeKind::HitVerifiedMismatch, true};
}

std::optional<CacheEntryState> ApproxKeyCache::peek(const ApproxKey& key) const {
  auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  return it->second.st;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>>
ApproxKeyCache::sequence_length_histogram() const {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out(run_lengths_.begin(),
                                                           run_lengths_.end());
  std::sort(out.begin(), out.end());
  return out;
}

void ApproxKeyCache::dump_entries(std::ostream& os) const {
  std::size_t rank = 0;
  for (const auto& key : lru_) {
    const Entry& e = map_.at(key);
    os << "{\"key_hex\":\"" << key.hex() << "\",\"label\":" << e.st.label
       << ",\"to_serve\":" << e.st.to_serve
       << ",\"refreshed\":" << e.st.refreshed << ",\"recency_rank\":" << rank
       << "}\n";
    ++rank;
  }
}

}  // namespace akcache
