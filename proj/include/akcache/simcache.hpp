#pragma once

#include <cstdint>
#include <list>
#include <vector>

#include "akcache/cache.hpp"

namespace akcache {

enum class IndexKind { LinearScan, PartitionTree };

struct SimilarityConfig {
  std::size_t capacity = 0;
  int k_neighbors = 10;
  double epsilon = 0.0;
  IndexKind index = IndexKind::LinearScan;
  // All cached vectors are zero-padded to this dimensionality before
  // Euclidean distance is computed.
  std::size_t dimension = 0;
};

struct SimEntry {
  InputVector key;  // padded
  ClassLabel label = 0;
  std::uint64_t recency = 0;
};

struct Neighbor {
  std::size_t entry_id = 0;
  std::int64_t sq_distance = 0;
  double distance = 0.0;
};

// Similarity-caching baseline: (original key, label) pairs answered by
// k-nearest-neighbor search with majority voting under a distance
// threshold. Replacement is LRU (recency updated on hit or insert). The
// partition-tree index is a ball tree rebuilt lazily once insertions since
// the last build exceed 10% of capacity; between rebuilds new entries are
// scanned linearly, so results are always identical to a full linear scan.
class SimilarityCache {
 public:
  explicit SimilarityCache(SimilarityConfig cfg);

  LookupOutcome lookup_and_maintain(const InputVector& x,
                                    const Classifier& classify);

  // Inserts a pair directly (evicting the least recent entry if full),
  // bypassing the nearest-neighbor lookup; used to pre-populate caches.
  void seed_entry(const InputVector& key, ClassLabel label);

  // The k nearest entries by Euclidean distance, ascending (ties by entry
  // id). Returns all entries when k exceeds the population.
  std::vector<Neighbor> knn(const InputVector& x, int k) const;

  const SimEntry& entry(std::size_t id) const { return slots_[id]; }
  std::size_t size() const { return alive_; }
  std::size_t capacity() const { return cfg_.capacity; }

 private:
  struct TreeNode {
    std::vector<double> center;
    double radius = 0.0;
    int left = -1, right = -1;
    std::vector<std::size_t> points;  // leaf payload
  };

  InputVector pad(const InputVector& x) const;
  std::size_t insert(InputVector key, ClassLabel label);
  void evict_oldest();
  void maybe_rebuild();
  void rebuild();
  int build_node(std::vector<std::size_t>& ids, std::size_t begin,
                 std::size_t end);
  void search_node(int node, const InputVector& q, int k,
                   std::vector<Neighbor>& best) const;

  SimilarityConfig cfg_;
  std::vector<SimEntry> slots_;
  std::vector<bool> dead_;
  std::vector<std::size_t> free_slots_;
  std::size_t alive_ = 0;
  std::uint64_t clock_ = 0;

  std::list<std::size_t> order_;  // front = most recently used
  std::vector<std::list<std::size_t>::iterator> order_it_;

  std::vector<TreeNode> nodes_;
  int root_ = -1;
  std::vector<std::size_t> pending_;  // inserted since last rebuild
  std::size_t dead_in_tree_ = 0;
};

}  // namespace akcache
