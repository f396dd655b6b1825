#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <optional>
#include <ostream>
#include <unordered_map>
#include <vector>

#include "akcache/approx.hpp"

namespace akcache {

using ClassLabel = std::int32_t;

// Ground-truth classifier. Invoked on cache misses and on verification
// hits; treated as slow, so calls are counted by the instrumentation.
using Classifier = std::function<ClassLabel(const InputVector&)>;

enum class Replacement { Lru, Ideal };
enum class ErrorControl { None, AutoRefresh };

// algorithm1 follows the auto-refresh pseudocode literally (to_serve grows
// as floor(beta^refreshed) per match). phi_sequence places the n-th
// verification of an entry's run exactly on arrival phi_n =
// max{n, floor(beta^(n-1))}, which is the schedule the analytical model
// assumes. The two agree on the first two verifications and share the
// asymptotic gap ratio beta, but differ in cumulative positions from the
// third verification on.
enum class ScheduleMode { Algorithm1, PhiSequence };

struct CacheConfig {
  std::size_t capacity = 0;
  Replacement replacement = Replacement::Lru;
  ApproxFn approx = ApproxFn::identity();
  ErrorControl error_control = ErrorControl::None;
  double beta = 2.0;
  ScheduleMode schedule = ScheduleMode::Algorithm1;
};

// Per-entry auto-refresh state. After insertion or a mismatch reset,
// (to_serve, refreshed) = (0, 1); after the k-th consecutive successful
// verification under algorithm1, to_serve was set to floor(beta^k).
struct CacheEntryState {
  ClassLabel label = 0;
  std::uint64_t to_serve = 0;
  std::uint32_t refreshed = 1;
};

enum class OutcomeKind {
  MissInserted,
  HitServed,
  HitVerifiedMatch,
  HitVerifiedMismatch,
};

struct LookupOutcome {
  ClassLabel label = 0;
  OutcomeKind kind = OutcomeKind::MissInserted;
  bool inference_invoked = false;
};

// floor(beta^k), saturated at 2^62 so back-off counters cannot overflow.
std::uint64_t floor_pow(double beta, std::uint32_t k);

// n-th verification arrival index of the phi schedule (1-based n).
std::int64_t phi_index(double beta, std::uint32_t n);

// First `count` arrival indices at which an uninterrupted entry is
// verified (the insertion inference on arrival 1 included).
std::vector<std::int64_t> verification_indices(double beta, ScheduleMode mode,
                                               int count);

// Exact-match cache over approximate keys with LRU or ideal replacement
// and optional auto-refresh error control. A lookup touches exactly one
// hash bucket; no distance computation happens here. Single-writer: all
// mutating lookups must come from one logical thread of control.
class ApproxKeyCache {
 public:
  explicit ApproxKeyCache(CacheConfig cfg);

  LookupOutcome lookup_and_maintain(const InputVector& x,
                                    const Classifier& classify);

  // Ideal replacement admits a key iff its popularity rank is <= capacity;
  // the rank map must cover every key that will be looked up.
  void set_popularity_ranks(std::unordered_map<ApproxKey, std::size_t> ranks);

  // Removes and returns the least recently used key. The cache must be at
  // capacity (internal invariant; throws std::logic_error otherwise).
  ApproxKey evict_lru();

  std::size_t size() const { return map_.size(); }
  std::size_t capacity() const { return cfg_.capacity; }
  const CacheConfig& config() const { return cfg_; }

  std::optional<CacheEntryState> peek(const ApproxKey& key) const;

  // Lengths of finished key runs (insertion up to eviction or mismatch),
  // (length, count) sorted by length.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> sequence_length_histogram()
      const;

  // One JSON object per line: {key_hex, label, to_serve, refreshed,
  // recency_rank}, most recent first.
  void dump_entries(std::ostream& os) const;

 private:
  struct Entry {
    CacheEntryState st;
    std::uint64_t run_length = 0;  // arrivals since insertion or mismatch reset
    std::list<ApproxKey>::iterator lru_it;
  };

  void insert_entry(ApproxKey key, ClassLabel label);
  void reset_state(CacheEntryState& st) const;
  void advance_backoff(CacheEntryState& st) const;
  void record_run(std::uint64_t length);

  CacheConfig cfg_;
  std::list<ApproxKey> lru_;  // front = most recently used
  std::unordered_map<ApproxKey, Entry> map_;
  std::unordered_map<ApproxKey, std::size_t> ranks_;
  std::unordered_map<std::uint64_t, std::uint64_t> run_lengths_;
};

}  // namespace akcache
