#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace akcache {

// A flow's packet time series: size in bytes times direction sign.
using InputVector = std::vector<std::int32_t>;

// Exact-match key produced by applying an approximation function to an
// InputVector. Equality and hashing are defined over the serialized byte
// form (1-byte length followed by 4-byte little-endian elements), so two
// keys compare equal iff their byte forms do.
class ApproxKey {
 public:
  ApproxKey() = default;
  explicit ApproxKey(std::vector<std::int32_t> elems);

  const std::vector<std::int32_t>& elements() const { return elems_; }
  std::string bytes() const;
  std::string hex() const;
  std::uint64_t hash() const { return hash_; }

  bool operator==(const ApproxKey& other) const {
    return elems_ == other.elems_;
  }

 private:
  std::vector<std::int32_t> elems_;
  std::uint64_t hash_ = 0;
};

struct ApproxKeyHash {
  std::size_t operator()(const ApproxKey& k) const {
    return static_cast<std::size_t>(k.hash());
  }
};

enum class ApproxKind { Identity, Prefix, Suffix, Every, MaxPool, Quantize, Compose };

// Pure, deterministic key-approximation function. Construct via the named
// factories or parse() and apply with operator(). Composition applies
// members left to right.
class ApproxFn {
 public:
  ApproxFn() : kind_(ApproxKind::Identity), n_(0) {}

  static ApproxFn identity();
  static ApproxFn prefix(int n);
  static ApproxFn suffix(int n);
  static ApproxFn every(int n);
  static ApproxFn maxpool(int n);
  static ApproxFn quantize(int n);
  static ApproxFn compose(std::vector<ApproxFn> fns);

  // Textual form: `identity`, `prefix:N`, `suffix:N`, `every:N`,
  // `maxpool:N`, `quantize:N`, and `A|B` for left-to-right composition,
  // e.g. "prefix:10|quantize:32".
  static ApproxFn parse(std::string_view text);
  std::string to_string() const;

  ApproxKey operator()(const InputVector& x) const;

  ApproxKind kind() const { return kind_; }
  int param() const { return n_; }
  const std::vector<ApproxFn>& parts() const { return parts_; }

 private:
  ApproxFn(ApproxKind kind, int n) : kind_(kind), n_(n) {}

  void apply_step(std::vector<std::int32_t>& v) const;

  ApproxKind kind_;
  int n_;
  std::vector<ApproxFn> parts_;  // Compose only
};

}  // namespace akcache

template <>
struct std::hash<akcache::ApproxKey> {
  std::size_t operator()(const akcache::ApproxKey& k) const noexcept {
    return static_cast<std::size_t>(k.hash());
  }
};
