#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace swag {

/// The only algebra the window tree assumes: a carrier set with an
/// associative combine and a two-sided neutral element. Combine takes its
/// left argument by value so accumulation loops can move through it.
template <typename M>
concept Monoid = requires(M const m, typename M::Value v) {
  { m.identity() } -> std::same_as<typename M::Value>;
  { m.combine(std::move(v), v) } -> std::same_as<typename M::Value>;
  { m.equals(v, v) } -> std::same_as<bool>;
};

/// Ordered left fold: identity for an empty range, v1*...*vk otherwise.
template <typename M, typename It>
typename M::Value fold(M const& m, It first, It last) {
  typename M::Value acc = m.identity();
  for (; first != last; ++first) acc = m.combine(std::move(acc), *first);
  return acc;
}

template <typename M, typename Range>
typename M::Value fold(M const& m, Range const& r) {
  return fold(m, r.begin(), r.end());
}

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Integer addition. Overflow is reported in assertion-enabled builds;
/// it signals monoid misuse at bench scale, not a recoverable condition.
struct SumMonoid {
  using Value = std::int64_t;
  Value identity() const { return 0; }
  Value combine(Value a, Value const& b) const {
#ifndef NDEBUG
    Value r;
    if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("SumMonoid: combine overflow");
    return r;
#else
    return a + b;
#endif
  }
  bool equals(Value const& a, Value const& b) const { return a == b; }
  Value lift(std::uint64_t x) const { return static_cast<Value>(x); }
};

/// Total-order maximum.
struct MaxMonoid {
  using Value = std::int64_t;
  Value identity() const { return INT64_MIN; }
  Value combine(Value a, Value const& b) const { return b > a ? b : a; }
  bool equals(Value const& a, Value const& b) const { return a == b; }
  Value lift(std::uint64_t x) const { return static_cast<Value>(x); }
};

/// Geometric mean, lifted so the carrier stays a true monoid: the record
/// combines componentwise and the mean is finalized outside via
/// geoMeanFinalize. logSum accumulates natural logs.
struct GeoMeanMonoid {
  struct Value {
    double logSum = 0.0;
    std::uint64_t count = 0;
    bool operator==(Value const&) const = default;
  };
  Value identity() const { return {}; }
  Value combine(Value a, Value const& b) const {
    a.logSum += b.logSum;
    a.count += b.count;
    return a;
  }
  bool equals(Value const& a, Value const& b) const {
    double tol = 1e-9 * std::max(1.0, std::max(std::fabs(a.logSum), std::fabs(b.logSum)));
    return a.count == b.count && std::fabs(a.logSum - b.logSum) <= tol;
  }
  Value lift(std::uint64_t x) const { return {std::log(static_cast<double>(x == 0 ? 1 : x)), 1}; }
};

inline double geoMeanFinalize(GeoMeanMonoid::Value const& v) {
  return v.count == 0 ? 0.0 : std::exp(v.logSum / static_cast<double>(v.count));
}

/// Bloom filter over 64-bit item keys: 8192 bits, k = 7 probes via double
/// hashing. Combine is bitwise OR, hence idempotent and commutative.
struct BloomMonoid {
  static constexpr int kBits = 8192;
  static constexpr int kWords = kBits / 64;
  static constexpr int kHashes = 7;
  struct Value {
    std::array<std::uint64_t, kWords> words{};
    bool operator==(Value const&) const = default;
  };
  Value identity() const { return {}; }
  Value combine(Value a, Value const& b) const {
    for (int i = 0; i < kWords; ++i) a.words[i] |= b.words[i];
    return a;
  }
  bool equals(Value const& a, Value const& b) const { return a == b; }
  Value lift(std::uint64_t key) const {
    Value v;
    std::uint64_t h1 = detail::splitmix64(key);
    std::uint64_t h2 = detail::splitmix64(key ^ 0xc3a5c85c97cb3127ULL) | 1;
    for (int i = 0; i < kHashes; ++i) {
      std::uint64_t bit = (h1 + static_cast<std::uint64_t>(i) * h2) % kBits;
      v.words[bit >> 6] |= 1ULL << (bit & 63);
    }
    return v;
  }
};

/// Byte-sequence concatenation. Non-commutative by construction, which is
/// exactly why the differential tests run on it: any ordering bug shows up
/// byte-for-byte.
struct ConcatMonoid {
  using Value = std::string;
  Value identity() const { return {}; }
  Value combine(Value a, Value const& b) const {
    a += b;
    return a;
  }
  bool equals(Value const& a, Value const& b) const { return a == b; }
  Value lift(std::uint64_t x) const {
    char buf[9];
    int n = 0;
    do {
      buf[n++] = static_cast<char>('a' + (x % 26));
      x /= 26;
    } while (x != 0 && n < 8);
    return Value(buf, static_cast<std::size_t>(n));
  }
};

}  // namespace swag
