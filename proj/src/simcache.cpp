#include "akcache/simcache.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "akcache/error.hpp"

namespace akcache {

namespace {

std::int64_t sq_distance(const InputVector& a, const InputVector& b) {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::int64_t d = static_cast<std::int64_t>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

double sq_distance_to_center(const InputVector& a,
                             const std::vector<double>& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - c[i];
    s += d * d;
  }
  return s;
}

bool better(const Neighbor& a, const Neighbor& b) {
  if (a.sq_distance != b.sq_distance) return a.sq_distance < b.sq_distance;
  return a.entry_id < b.entry_id;
}

// Keep the k best neighbors in `best` (sorted ascending).
void offer(std::vector<Neighbor>& best, int k, Neighbor cand) {
  if (static_cast<int>(best.size()) == k && !better(cand, best.back())) return;
  auto pos = std::lower_bound(best.begin(), best.end(), cand, better);
  best.insert(pos, cand);
  if (static_cast<int>(best.size()) > k) best.pop_back();
}

constexpr std::size_t kLeafSize = 16;

}  // namespace

SimilarityCache::SimilarityCache(SimilarityConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.capacity == 0) {
    throw ConfigError("similarity cache capacity must be positive");
  }
  if (cfg_.k_neighbors < 1) {
    throw ConfigError("k_neighbors must be >= 1");
  }
  if (static_cast<std::size_t>(cfg_.k_neighbors) > cfg_.capacity) {
    throw ConfigError("k_neighbors must not exceed capacity");
  }
  if (cfg_.dimension == 0) {
    throw ConfigError("similarity cache dimension must be positive");
  }
  if (cfg_.epsilon < 0.0) {
    throw ConfigError("distance threshold must be non-negative");
  }
}

InputVector SimilarityCache::pad(const InputVector& x) const {
  if (x.size() > cfg_.dimension) {
    throw ConfigError("input longer than configured similarity dimension");
  }
  InputVector v(cfg_.dimension, 0);
  std::copy(x.begin(), x.end(), v.begin());
  return v;
}

std::size_t SimilarityCache::insert(InputVector key, ClassLabel label) {
  std::size_t id;
  if (!free_slots_.empty()) {
    id = free_slots_.back();
    free_slots_.pop_back();
    slots_[id] = SimEntry{std::move(key), label, ++clock_};
    dead_[id] = false;
  } else {
    id = slots_.size();
    slots_.push_back(SimEntry{std::move(key), label, ++clock_});
    dead_.push_back(false);
    order_it_.resize(slots_.size());
  }
  order_.push_front(id);
  order_it_[id] = order_.begin();
  ++alive_;
  if (cfg_.index == IndexKind::PartitionTree) {
    pending_.push_back(id);
    maybe_rebuild();
  }
  return id;
}

void SimilarityCache::evict_oldest() {
  std::size_t id = order_.back();
  order_.pop_back();
  dead_[id] = true;
  free_slots_.push_back(id);
  --alive_;
  if (cfg_.index == IndexKind::PartitionTree) {
    auto pit = std::find(pending_.begin(), pending_.end(), id);
    if (pit != pending_.end()) {
      pending_.erase(pit);
    } else {
      ++dead_in_tree_;
    }
    maybe_rebuild();
  }
}

void SimilarityCache::maybe_rebuild() {
  std::size_t budget = std::max<std::size_t>(1, cfg_.capacity / 10);
  if (pending_.size() > budget || dead_in_tree_ > budget) rebuild();
}

void SimilarityCache::rebuild() {
  nodes_.clear();
  pending_.clear();
  dead_in_tree_ = 0;
  std::vector<std::size_t> ids;
  ids.reserve(alive_);
  for (std::size_t id = 0; id < slots_.size(); ++id) {
    if (!dead_[id]) ids.push_back(id);
  }
  root_ = ids.empty() ? -1 : build_node(ids, 0, ids.size());
}

int SimilarityCache::build_node(std::vector<std::size_t>& ids,
                                std::size_t begin, std::size_t end) {
  TreeNode node;
  node.center.assign(cfg_.dimension, 0.0);
  for (std::size_t i = begin; i < end; ++i) {
    const InputVector& p = slots_[ids[i]].key;
    for (std::size_t d = 0; d < cfg_.dimension; ++d) node.center[d] += p[d];
  }
  const double inv = 1.0 / static_cast<double>(end - begin);
  for (auto& c : node.center) c *= inv;
  node.radius = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    node.radius = std::max(
        node.radius, sq_distance_to_center(slots_[ids[i]].key, node.center));
  }
  node.radius = std::sqrt(node.radius);

  if (end - begin <= kLeafSize) {
    node.points.assign(ids.begin() + begin, ids.begin() + end);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Two-pole split: the point farthest from the first, then the point
  // farthest from that pole; children partition by nearer pole.
  const InputVector& seed = slots_[ids[begin]].key;
  std::size_t pa = begin;
  std::int64_t best = -1;
  for (std::size_t i = begin; i < end; ++i) {
    std::int64_t d = sq_distance(seed, slots_[ids[i]].key);
    if (d > best) {
      best = d;
      pa = i;
    }
  }
  const InputVector pole_a = slots_[ids[pa]].key;
  std::size_t pb = begin;
  best = -1;
  for (std::size_t i = begin; i < end; ++i) {
    std::int64_t d = sq_distance(pole_a, slots_[ids[i]].key);
    if (d > best) {
      best = d;
      pb = i;
    }
  }
  const InputVector pole_b = slots_[ids[pb]].key;

  auto mid = std::partition(ids.begin() + begin, ids.begin() + end,
                            [&](std::size_t id) {
                              const InputVector& p = slots_[id].key;
                              return sq_distance(p, pole_a) <=
                                     sq_distance(p, pole_b);
                            });
  std::size_t split = static_cast<std::size_t>(mid - ids.begin());
  if (split == begin || split == end) {
    split = begin + (end - begin) / 2;  // duplicate-heavy: force a balance
  }
  int self = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(node));
  int left = build_node(ids, begin, split);
  int right = build_node(ids, split, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void SimilarityCache::search_node(int node, const InputVector& q, int k,
                                  std::vector<Neighbor>& best) const {
  const TreeNode& n = nodes_[node];
  if (static_cast<int>(best.size()) == k) {
    double dc = std::sqrt(sq_distance_to_center(q, n.center));
    double lb = dc - n.radius;
    if (lb > 0.0) {
      double worst = std::sqrt(static_cast<double>(best.back().sq_distance));
      // Conservative slack so borderline-equal candidates are never pruned;
      // tie sets must match a linear scan exactly.
      if (lb * lb > static_cast<double>(best.back().sq_distance) * (1.0 + 1e-9) +
                        1e-6 &&
          lb > worst) {
        return;
      }
    }
  }
  if (n.left < 0) {
    for (std::size_t id : n.points) {
      if (dead_[id]) continue;
      std::int64_t sq = sq_distance(q, slots_[id].key);
      offer(best, k, Neighbor{id, sq, 0.0});
    }
    return;
  }
  double dl = sq_distance_to_center(q, nodes_[n.left].center);
  double dr = sq_distance_to_center(q, nodes_[n.right].center);
  if (dl <= dr) {
    search_node(n.left, q, k, best);
    search_node(n.right, q, k, best);
  } else {
    search_node(n.right, q, k, best);
    search_node(n.left, q, k, best);
  }
}

std::vector<Neighbor> SimilarityCache::knn(const InputVector& x, int k) const {
  if (k < 1) throw ConfigError("knn requires k >= 1");
  InputVector q = pad(x);
  std::vector<Neighbor> best;
  best.reserve(k + 1);
  if (cfg_.index == IndexKind::LinearScan) {
    for (std::size_t id = 0; id < slots_.size(); ++id) {
      if (dead_[id]) continue;
      offer(best, k, Neighbor{id, sq_distance(q, slots_[id].key), 0.0});
    }
  } else {
    if (root_ >= 0) search_node(root_, q, k, best);
    for (std::size_t id : pending_) {
      offer(best, k, Neighbor{id, sq_distance(q, slots_[id].key), 0.0});
    }
  }
  for (auto& nb : best) {
    nb.distance = std::sqrt(static_cast<double>(nb.sq_distance));
  }
  return best;
}

void SimilarityCache::seed_entry(const InputVector& key, ClassLabel label) {
  if (alive_ == cfg_.capacity) evict_oldest();
  insert(pad(key), label);
}

LookupOutcome SimilarityCache::lookup_and_maintain(const InputVector& x,
                                                   const Classifier& classify) {
  if (alive_ > 0) {
    std::vector<Neighbor> nbrs = knn(x, cfg_.k_neighbors);
    if (!nbrs.empty() && nbrs.front().distance <= cfg_.epsilon) {
      // Majority vote over the neighbors within the threshold; ties go to
      // the label with the nearest member, then to the lowest label id.
      std::map<ClassLabel, std::pair<int, std::int64_t>> votes;  // count, best sq
      for (const Neighbor& nb : nbrs) {
        if (nb.distance > cfg_.epsilon) break;
        ClassLabel lab = slots_[nb.entry_id].label;
        auto [it, fresh] = votes.try_emplace(lab, std::make_pair(0, nb.sq_distance));
        ++it->second.first;
        (void)fresh;
      }
      ClassLabel winner = 0;
      int best_count = -1;
      std::int64_t best_sq = 0;
      for (const auto& [lab, v] : votes) {
        if (v.first > best_count ||
            (v.first == best_count && v.second < best_sq)) {
          winner = lab;
          best_count = v.first;
          best_sq = v.second;
        }
      }
      std::size_t hit_id = nbrs.front().entry_id;
      slots_[hit_id].recency = ++clock_;
      order_.splice(order_.begin(), order_, order_it_[hit_id]);
      return {winner, OutcomeKind::HitServed, false};
    }
  }
  ClassLabel y = classify(x);
  if (alive_ == cfg_.capacity) evict_oldest();
  insert(pad(x), y);
  return {y, OutcomeKind::MissInserted, true};
}

}  // namespace akcache
