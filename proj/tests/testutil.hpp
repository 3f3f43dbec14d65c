#pragma once

#include <utility>
#include <vector>

#include "swag/tree.hpp"

namespace swag {

/// Test-side access to tree internals: deterministic fixture construction,
/// primitive-operation hooks, and controlled corruption for fault injection.
struct TreeTestAccess {
  template <Monoid M>
  using NodeOf = typename FingerBTree<M>::NodeT;

  template <Monoid M>
  static NodeOf<M>* root(FingerBTree<M>& t) {
    return t.root_;
  }

  template <Monoid M>
  static NodeOf<M>* mut(NodeOf<M> const* n) {
    return const_cast<NodeOf<M>*>(n);
  }

  struct Shape {
    std::vector<Timestamp> times;
    std::vector<Shape> children;
  };

  /// Replace the tree's contents with an exact node structure; values are
  /// lift(timestamp). The caller owns making the shape a legal tree.
  template <Monoid M>
  static void build(FingerBTree<M>& t, Shape const& shape) {
    using NodeT = NodeOf<M>;
    t.pool_.deferFree(t.root_);
    std::uint64_t count = 0;
    auto rec = [&](auto&& self, Shape const& s) -> NodeT* {
      NodeT* n = t.pool_.alloc(0);
      for (auto const& cs : s.children) {
        NodeT* c = self(self, cs);
        c->parent = n;
        n->children.push_back(c);
      }
      if (!n->children.empty()) n->height = n->children.front()->height + 1;
      for (Timestamp ts : s.times) {
        n->times.push_back(ts);
        n->values.push_back(t.monoid_.lift(ts));
      }
      count += s.times.size();
      return n;
    };
    t.root_ = rec(rec, shape);
    t.becomeRoot(t.root_);
    t.size_ = count;
    for (NodeT* x = t.root_; !x->isLeaf();) {
      x = x->children.front();
      x->leftSpine = true;
    }
    for (NodeT* x = t.root_; !x->isLeaf();) {
      x = x->children.back();
      x->rightSpine = true;
    }
    auto repairRec = [&](auto&& self, NodeT* n) -> void {
      for (NodeT* c : n->children) self(self, c);
      if (n->kind() == AggKind::Up) t.repairAggAt(n);
    };
    repairRec(repairRec, t.root_);
    t.repairAggAt(t.root_);
    t.repairLeftSpine(t.root_);
    t.repairRightSpine(t.root_);
  }

  template <Monoid M>
  static bool localEvictUpTo(FingerBTree<M>& t, NodeOf<M>* n, Timestamp ts) {
    return t.localEvictUpTo(n, ts);
  }

  template <Monoid M>
  static void moveBatch(FingerBTree<M>& t, NodeOf<M>* node, NodeOf<M>* nb, NodeOf<M>* anc,
                        int k) {
    t.moveBatch(node, nb, anc, k);
  }

  template <Monoid M>
  static void mergeNotSibling(FingerBTree<M>& t, NodeOf<M>* node, NodeOf<M>* nb, NodeOf<M>* anc) {
    t.mergeNotSibling(node, nb, anc);
  }

  template <Monoid M>
  static void repairAggAt(FingerBTree<M>& t, NodeOf<M>* n) {
    t.repairAggAt(n);
  }

  template <Monoid M>
  static std::vector<Timestamp> interleaveTimes(
      FingerBTree<M>& t, NodeOf<M>* node,
      std::vector<std::pair<Timestamp, typename M::Value>> payload) {
    (void)t;
    using PayloadItem = typename FingerBTree<M>::PayloadItem;
    std::vector<PayloadItem> items;
    items.reserve(payload.size());
    for (auto& [ts, v] : payload) items.push_back({ts, std::move(v), nullptr});
    typename FingerBTree<M>::InterleaveCursor cur(
        node, std::span<PayloadItem>(items.data(), items.size()));
    std::vector<Timestamp> out;
    while (cur.hasNext()) out.push_back(cur.next().time);
    return out;
  }
};

namespace testutil {

/// All nodes at a given height, left to right, by brute-force walk.
template <typename NodeT>
inline void collectAtHeight(NodeT const* n, std::uint32_t h, std::vector<NodeT const*>& out) {
  if (n->height == h) {
    out.push_back(n);
    return;
  }
  for (auto const* c : n->children) collectAtHeight(c, h, out);
}

/// Least common ancestor by parent walks.
template <typename NodeT>
inline NodeT const* bruteLca(NodeT const* a, NodeT const* b) {
  for (NodeT const* x = a; x != nullptr; x = x->parent)
    for (NodeT const* y = b; y != nullptr; y = y->parent)
      if (x == y) return x;
  return nullptr;
}

template <typename NodeT>
inline Timestamp subtreeMin(NodeT const* n) {
  while (!n->isLeaf()) n = n->children.front();
  return n->times.front();
}

template <typename NodeT>
inline Timestamp subtreeMax(NodeT const* n) {
  while (!n->isLeaf()) n = n->children.back();
  return n->times.back();
}

}  // namespace testutil
}  // namespace swag
