#pragma once

#include <cassert>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "swag/node.hpp"

namespace swag {

/// Deferred free list. Evicted subtrees are parked here one node at a
/// time instead of being reclaimed recursively: each allocation pops one
/// node, pushes its children, and reuses the storage, so eviction never
/// pays more than O(1) per pushed node and allocation stays worst-case
/// constant.
template <typename Value>
class NodePool {
 public:
  using NodeT = Node<Value>;

  explicit NodePool(int maxArity) : maxArity_(maxArity) {}

  NodePool(NodePool const&) = delete;
  NodePool& operator=(NodePool const&) = delete;

  ~NodePool() { drain(); }

  /// Park an unreachable subtree root. Descendants are untouched.
  void deferFree(NodeT* node) {
    assert(node != nullptr);
#ifndef NDEBUG
    if (trackMembership_) {
      assert(!pendingSet_.contains(node) && "node already on the free list");
      pendingSet_.insert(node);
    }
#endif
    pending_.push_back(node);
    ++lifetimePushes_;
  }

  /// Pop one node, push its children, reset it, and hand it back; falls
  /// back to a fresh allocation when the list is empty.
  NodeT* alloc(std::uint32_t height) {
    NodeT* node;
    if (pending_.empty()) {
      node = new NodeT();
      node->times.reserve(static_cast<std::size_t>(maxArity_ - 1));
      node->values.reserve(static_cast<std::size_t>(maxArity_ - 1));
      node->children.reserve(static_cast<std::size_t>(maxArity_));
      ++lifetimeAllocs_;
    } else {
      node = popOne();
    }
    node->times.clear();
    node->values.clear();
    node->children.clear();
    node->parent = nullptr;
    node->agg = Value{};
    node->count = 0;
    node->height = height;
    node->leftSpine = false;
    node->rightSpine = false;
    return node;
  }

  /// Release everything, including descendants reached lazily.
  void drain() {
    while (!pending_.empty()) {
      NodeT* node = popOne();
      delete node;
      ++lifetimeReleases_;
    }
  }

  std::size_t pendingCount() const { return pending_.size(); }

  /// Nodes reachable from the free list, descendants included. Test-side
  /// conservation checks want the lazy tail counted too.
  std::size_t reachableCount() const {
    std::size_t n = 0;
    std::vector<NodeT const*> stack(pending_.begin(), pending_.end());
    while (!stack.empty()) {
      NodeT const* node = stack.back();
      stack.pop_back();
      ++n;
      for (NodeT const* c : node->children) stack.push_back(c);
    }
    return n;
  }

  std::uint64_t lifetimeAllocs() const { return lifetimeAllocs_; }
  std::uint64_t lifetimeReleases() const { return lifetimeReleases_; }
  std::uint64_t lifetimePushes() const { return lifetimePushes_; }
  std::uint64_t& pushCounter() { return lifetimePushes_; }

  void setTrackMembership(bool on) {
#ifndef NDEBUG
    trackMembership_ = on;
    pendingSet_.clear();
    for (NodeT* n : pending_) pendingSet_.insert(n);
#else
    (void)on;
#endif
  }

 private:
  NodeT* popOne() {
    NodeT* node = pending_.back();
    pending_.pop_back();
#ifndef NDEBUG
    if (trackMembership_) pendingSet_.erase(node);
#endif
    for (NodeT* c : node->children) deferFree(c);
    node->children.clear();
    return node;
  }

  int maxArity_;
  std::vector<NodeT*> pending_;
  std::uint64_t lifetimeAllocs_ = 0;
  std::uint64_t lifetimeReleases_ = 0;
  std::uint64_t lifetimePushes_ = 0;
#ifndef NDEBUG
  bool trackMembership_ = false;
  std::unordered_set<NodeT*> pendingSet_;
#endif
};

}  // namespace swag
