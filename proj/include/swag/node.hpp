#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace swag {

using Timestamp = std::uint64_t;

/// Which location-sensitive aggregate a node stores.
enum class AggKind { Up, Inner, Left, Right };

/// One tree node: parallel times/values arrays (entries = arity - 1),
/// child links for internal nodes, parent link, spine flags, and a single
/// location-sensitive aggregate plus the matching entry count. `height` is
/// the distance to the leaf level and never changes over a node's lifetime.
template <typename Value>
struct Node {
  std::vector<Timestamp> times;
  std::vector<Value> values;
  std::vector<Node*> children;
  Node* parent = nullptr;
  Value agg{};
  std::uint64_t count = 0;
  std::uint32_t height = 0;
  bool leftSpine = false;
  bool rightSpine = false;

  bool isLeaf() const { return children.empty(); }
  bool isRoot() const { return parent == nullptr; }
  int entries() const { return static_cast<int>(times.size()); }
  int arity() const { return isLeaf() ? entries() + 1 : static_cast<int>(children.size()); }
  Timestamp firstTime() const { return times.front(); }
  Timestamp lastTime() const { return times.back(); }

  AggKind kind() const {
    if (isRoot()) return AggKind::Inner;
    if (leftSpine) return AggKind::Left;
    if (rightSpine) return AggKind::Right;
    return AggKind::Up;
  }

  /// Index of the first entry with time >= t (entries() if none).
  int lowerBound(Timestamp t) const {
    int lo = 0, hi = entries();
    while (lo < hi) {
      int mid = (lo + hi) / 2;
      if (times[static_cast<std::size_t>(mid)] < t)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

  /// Number of leading entries with time <= t.
  int deadPrefix(Timestamp t) const {
    int i = lowerBound(t);
    if (i < entries() && times[static_cast<std::size_t>(i)] == t) ++i;
    return i;
  }

  bool containsTime(Timestamp t) const {
    int i = lowerBound(t);
    return i < entries() && times[static_cast<std::size_t>(i)] == t;
  }

  int childIndex() const {
    assert(parent != nullptr);
    for (int i = 0, n = parent->arity(); i < n; ++i)
      if (parent->children[static_cast<std::size_t>(i)] == this) return i;
    assert(false);
    return -1;
  }
};

}  // namespace swag
