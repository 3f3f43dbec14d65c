#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "swag/pool.hpp"
#include "swag/tree.hpp"
#include "testutil.hpp"

using namespace swag;

TEST_CASE("deferFree then alloc reuses the same storage") {
  NodePool<std::int64_t> pool(8);
  auto* a = pool.alloc(0);
  CHECK(pool.lifetimeAllocs() == 1);
  pool.deferFree(a);
  auto* b = pool.alloc(0);
  CHECK(b == a);
  CHECK(pool.lifetimeAllocs() == 1);  // recycled, not freshly allocated
  pool.deferFree(b);
}

TEST_CASE("alloc pops one node and pushes its children") {
  NodePool<std::int64_t> pool(8);
  auto* parent = pool.alloc(1);
  for (int i = 0; i < 4; ++i) {
    auto* c = pool.alloc(0);
    c->parent = parent;
    parent->children.push_back(c);
  }
  pool.deferFree(parent);
  CHECK(pool.pendingCount() == 1);
  CHECK(pool.reachableCount() == 5);
  auto pushesBefore = pool.lifetimePushes();
  auto* reused = pool.alloc(0);
  CHECK(reused == parent);
  CHECK(pool.pendingCount() == 4);  // the four children
  CHECK(pool.lifetimePushes() - pushesBefore == 4);
  // recycle everything: each subsequent alloc pops a leaf, zero pushes
  for (int i = 0; i < 4; ++i) (void)pool.alloc(0);
  CHECK(pool.pendingCount() == 0);
}

TEST_CASE("drain empties the list and is idempotent") {
  NodePool<std::int64_t> pool(4);
  auto* n = pool.alloc(1);
  for (int i = 0; i < 3; ++i) {
    auto* c = pool.alloc(0);
    n->children.push_back(c);
  }
  pool.deferFree(n);
  pool.drain();
  CHECK(pool.pendingCount() == 0);
  CHECK(pool.lifetimeAllocs() == pool.lifetimeReleases());
  pool.drain();
  CHECK(pool.pendingCount() == 0);
}

TEST_CASE("conservation: allocations equal releases plus live plus reachable") {
  ConcatMonoid m;
  FingerBTree<ConcatMonoid> t(2, m);
  t.pool().setTrackMembership(true);  // also guards double-free in debug builds
  std::mt19937_64 rng(23);
  for (int op = 0; op < 2000; ++op) {
    if (rng() % 3 != 0) {
      std::vector<std::pair<Timestamp, std::string>> raw;
      int mlen = 1 + int(rng() % 32);
      Timestamp lo = rng() % 3000;
      for (int i = 0; i < mlen; ++i) raw.emplace_back(lo + rng() % 400, m.lift(rng()));
      t.bulkInsert(sortAndCombine(m, std::move(raw)));
    } else {
      t.bulkEvict(rng() % 4000);
    }
    std::size_t liveNodes = 0;
    auto count = [&](auto&& self, decltype(t.rootNode()) n) -> void {
      ++liveNodes;
      for (auto const* c : n->children) self(self, c);
    };
    count(count, t.rootNode());
    CHECK(t.pool().lifetimeAllocs() ==
          t.pool().lifetimeReleases() + liveNodes + t.pool().reachableCount());
  }
}

TEST_CASE("free-list pushes per bulkEvict stay within the boundary bound") {
  SumMonoid m;
  FingerBTree<SumMonoid> t(2, m);
  std::mt19937_64 rng(29);
  std::vector<FingerBTree<SumMonoid>::Entry> bulk;
  for (std::uint64_t i = 0; i < 20000; ++i) bulk.emplace_back(i * 7, 1);
  t.bulkInsert(bulk);
  Timestamp cut = 0;
  while (t.size() > 64) {
    cut += 1 + rng() % 2048;
    auto pushesBefore = t.pool().lifetimePushes();
    t.resetCounters();
    t.bulkEvict(cut * 7);
    auto pushes = t.pool().lifetimePushes() - pushesBefore;
    auto levels = t.counters().boundaryLevels;
    if (levels > 0)
      CHECK(pushes <= std::uint64_t(t.maxArity()) * levels);
    REQUIRE(t.validate().empty());
  }
}
