#include "akcache/approx.hpp"

#include <algorithm>
#include <cstdio>

#include "akcache/error.hpp"

namespace akcache {

namespace {

// Round to the nearest multiple of n, ties away from zero.
std::int32_t round_to_multiple(std::int32_t v, int n) {
  std::int64_t a = v < 0 ? -static_cast<std::int64_t>(v) : v;
  std::int64_t k = a / n;
  if (2 * (a % n) >= n) ++k;
  std::int64_t r = k * n;
  return static_cast<std::int32_t>(v < 0 ? -r : r);
}

}  // namespace

ApproxKey::ApproxKey(std::vector<std::int32_t> elems) : elems_(std::move(elems)) {
  if (elems_.size() > 255) {
    throw ConfigError("approx key longer than 255 elements");
  }
  // FNV-1a over the serialized byte form, computed without materializing it
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  feed(static_cast<unsigned char>(elems_.size()));
  for (std::int32_t e : elems_) {
    auto u = static_cast<std::uint32_t>(e);
    feed(u & 0xff);
    feed((u >> 8) & 0xff);
    feed((u >> 16) & 0xff);
    feed((u >> 24) & 0xff);
  }
  hash_ = h;
}

std::string ApproxKey::bytes() const {
  if (elems_.size() > 255) {
    throw ConfigError("approx key longer than 255 elements");
  }
  std::string out;
  out.reserve(1 + 4 * elems_.size());
  out.push_back(static_cast<char>(elems_.size()));
  for (std::int32_t e : elems_) {
    auto u = static_cast<std::uint32_t>(e);
    out.push_back(static_cast<char>(u & 0xff));
    out.push_back(static_cast<char>((u >> 8) & 0xff));
    out.push_back(static_cast<char>((u >> 16) & 0xff));
    out.push_back(static_cast<char>((u >> 24) & 0xff));
  }
  return out;
}

std::string ApproxKey::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string b = bytes();
  std::string out;
  out.reserve(2 * b.size());
  for (unsigned char c : b) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xf]);
  }
  return out;
}

ApproxFn ApproxFn::identity() { return ApproxFn(ApproxKind::Identity, 0); }

namespace {
void check_param(const char* name, int n) {
  if (n < 1) {
    throw ConfigError(std::string(name) + " requires n >= 1, got " +
                      std::to_string(n));
  }
}
}  // namespace

ApproxFn ApproxFn::prefix(int n) {
  check_param("prefix", n);
  return ApproxFn(ApproxKind::Prefix, n);
}

ApproxFn ApproxFn::suffix(int n) {
  check_param("suffix", n);
  return ApproxFn(ApproxKind::Suffix, n);
}

ApproxFn ApproxFn::every(int n) {
  check_param("every", n);
  return ApproxFn(ApproxKind::Every, n);
}

ApproxFn ApproxFn::maxpool(int n) {
  check_param("maxpool", n);
  return ApproxFn(ApproxKind::MaxPool, n);
}

ApproxFn ApproxFn::quantize(int n) {
  check_param("quantize", n);
  return ApproxFn(ApproxKind::Quantize, n);
}

ApproxFn ApproxFn::compose(std::vector<ApproxFn> fns) {
  if (fns.empty()) {
    throw ConfigError("compose requires a non-empty function list");
  }
  ApproxFn fn(ApproxKind::Compose, 0);
  fn.parts_ = std::move(fns);
  return fn;
}

void ApproxFn::apply_step(std::vector<std::int32_t>& v) const {
  const std::size_t len = v.size();
  switch (kind_) {
    case ApproxKind::Identity:
      break;
    case ApproxKind::Prefix:
      if (static_cast<std::size_t>(n_) < len) v.resize(n_);
      break;
    case ApproxKind::Suffix:
      if (static_cast<std::size_t>(n_) < len) {
        v.erase(v.begin(), v.end() - n_);
      }
      break;
    case ApproxKind::Every: {
      std::size_t w = 0;
      for (std::size_t i = 0; i < len; i += n_) v[w++] = v[i];
      v.resize(w);
      break;
    }
    case ApproxKind::MaxPool: {
      std::size_t w = 0;
      for (std::size_t i = 0; i < len; i += n_) {
        std::size_t end = std::min(len, i + n_);
        v[w++] = *std::max_element(v.begin() + i, v.begin() + end);
      }
      v.resize(w);
      break;
    }
    case ApproxKind::Quantize:
      for (auto& e : v) e = round_to_multiple(e, n_);
      break;
    case ApproxKind::Compose:
      for (const auto& part : parts_) part.apply_step(v);
      break;
  }
}

ApproxKey ApproxFn::operator()(const InputVector& x) const {
  if (x.empty()) {
    throw std::invalid_argument("approx input must be non-empty");
  }
  std::vector<std::int32_t> v = x;
  apply_step(v);
  return ApproxKey(std::move(v));
}

ApproxFn ApproxFn::parse(std::string_view text) {
  std::vector<ApproxFn> parts;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t bar = text.find('|', pos);
    std::string_view tok = text.substr(
        pos, bar == std::string_view::npos ? std::string_view::npos : bar - pos);
    if (tok.empty()) {
      throw ConfigError("empty term in approx spec '" + std::string(text) + "'");
    }
    std::size_t colon = tok.find(':');
    std::string name(tok.substr(0, colon));
    int n = 0;
    if (colon != std::string_view::npos) {
      try {
        n = std::stoi(std::string(tok.substr(colon + 1)));
      } catch (const std::exception&) {
        throw ConfigError("bad parameter in approx term '" + std::string(tok) + "'");
      }
    }
    if (name == "identity" && colon == std::string_view::npos) {
      parts.push_back(identity());
    } else if (name == "prefix") {
      parts.push_back(prefix(n));
    } else if (name == "suffix") {
      parts.push_back(suffix(n));
    } else if (name == "every") {
      parts.push_back(every(n));
    } else if (name == "maxpool") {
      parts.push_back(maxpool(n));
    } else if (name == "quantize") {
      parts.push_back(quantize(n));
    } else {
      throw ConfigError("unknown approx term '" + std::string(tok) + "'");
    }
    if (bar == std::string_view::npos) break;
    pos = bar + 1;
  }
  if (parts.size() == 1) return parts.front();
  return compose(std::move(parts));
}

std::string ApproxFn::to_string() const {
  switch (kind_) {
    case ApproxKind::Identity:
      return "identity";
    case ApproxKind::Prefix:
      return "prefix:" + std::to_string(n_);
    case ApproxKind::Suffix:
      return "suffix:" + std::to_string(n_);
    case ApproxKind::Every:
      return "every:" + std::to_string(n_);
    case ApproxKind::MaxPool:
      return "maxpool:" + std::to_string(n_);
    case ApproxKind::Quantize:
      return "quantize:" + std::to_string(n_);
    case ApproxKind::Compose: {
      std::string out;
      for (std::size_t i = 0; i < parts_.size(); ++i) {
        if (i) out.push_back('|');
        out += parts_[i].to_string();
      }
      return out;
    }
  }
  return "identity";
}

}  // namespace akcache
