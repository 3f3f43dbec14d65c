#pragma once

#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "swag/monoids.hpp"
#include "swag/node.hpp"

namespace swag {

/// Brute-force reference window: an ordered map of (timestamp, value)
/// holding the literal set semantics of the abstract data type.
/// Deliberately simple and slow; exists only for differential testing.
template <Monoid M>
class OracleWindow {
 public:
  using Value = typename M::Value;
  using Entry = std::pair<Timestamp, Value>;

  explicit OracleWindow(M monoid = M()) : monoid_(std::move(monoid)) {}

  std::size_t size() const { return window_.size(); }

  Value query() const {
    Value acc = monoid_.identity();
    for (auto const& [t, v] : window_) acc = monoid_.combine(std::move(acc), v);
    return acc;
  }

  /// Removes every entry with timestamp <= t.
  void bulkEvict(Timestamp t) { window_.erase(window_.begin(), window_.upper_bound(t)); }

  /// Inserts a strictly increasing bulk; colliding timestamps combine as
  /// existing-then-incoming.
  void bulkInsert(std::vector<Entry> const& bulk) {
    for (auto const& [t, v] : bulk) {
      auto [it, fresh] = window_.emplace(t, v);
      if (!fresh) it->second = monoid_.combine(std::move(it->second), v);
    }
  }

  void insert(Timestamp t, Value v) { bulkInsert({{t, std::move(v)}}); }

  std::vector<Entry> entries() const {
    return std::vector<Entry>(window_.begin(), window_.end());
  }

  /// Ordered "timestamp value" lines, one per entry.
  std::string dump() const {
    std::ostringstream os;
    for (auto const& [t, v] : window_) {
      os << t << ' ';
      print(os, v);
      os << '\n';
    }
    return os.str();
  }

 private:
  template <typename V>
  static void print(std::ostream& os, V const& v) {
    os << v;
  }
  static void print(std::ostream& os, GeoMeanMonoid::Value const& v) {
    os << v.logSum << '/' << v.count;
  }
  static void print(std::ostream& os, BloomMonoid::Value const& v) {
    std::uint64_t h = 0;
    for (std::uint64_t w : v.words) h = h * 1099511628211ULL + w;
    os << h;
  }

  M monoid_;
  std::map<Timestamp, Value> window_;
};

}  // namespace swag
