#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "swag/oracle.hpp"
#include "swag/tree.hpp"
#include "testutil.hpp"

using namespace swag;
using Access = TreeTestAccess;

TEST_CASE("newTree basics") {
  FingerBTree<SumMonoid> t(4);
  CHECK(t.size() == 0);
  CHECK(t.query() == 0);
  CHECK(!t.oldestTime().has_value());
  CHECK(t.validate().empty());

  FingerBTree<SumMonoid> t2(2);
  CHECK(t2.maxArity() == 4);

  CHECK_THROWS_AS(FingerBTree<SumMonoid>(1), std::invalid_argument);
}

TEST_CASE("query of a small max window") {
  FingerBTree<MaxMonoid> t(2);
  t.insert(1, 4);
  t.insert(2, 2);
  t.insert(3, 5);
  CHECK(t.query() == 5);
}

TEST_CASE("query equals oracle fold on a 10^4 concat window") {
  ConcatMonoid m;
  FingerBTree<ConcatMonoid> t(2);
  OracleWindow<ConcatMonoid> oracle;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    Timestamp ts = rng() % 100000;
    auto v = m.lift(rng());
    t.insert(ts, v);
    oracle.insert(ts, v);
  }
  CHECK(t.query() == oracle.query());
  CHECK(t.size() == oracle.size());
}

TEST_CASE("aggKind classification") {
  FingerBTree<SumMonoid> t(2);
  for (std::uint64_t i = 0; i < 64; ++i) t.insert(i, 1);
  REQUIRE(t.height() >= 2);
  CHECK(t.aggKind(t.rootNode()) == AggKind::Inner);
  CHECK(t.aggKind(t.leftFingerNode()) == AggKind::Left);
  CHECK(t.aggKind(t.rightFingerNode()) == AggKind::Right);
  // an internal non-spine node stores the up aggregate
  auto const* mid = t.rootNode()->children[1];
  CHECK(t.aggKind(mid) == AggKind::Up);
}

TEST_CASE("location-sensitive aggregate formulas on a fixed shape") {
  // root [30,60] over three leaves; concat exposes ordering
  Access::Shape shape{{30, 60},
                      {Access::Shape{{10, 20}, {}}, Access::Shape{{40, 50}, {}},
                       Access::Shape{{70, 80}, {}}}};
  ConcatMonoid m;
  FingerBTree<ConcatMonoid> t(2, m);
  Access::build(t, shape);
  REQUIRE(t.validate().empty());

  auto lift = [&](Timestamp ts) { return m.lift(ts); };
  // up aggregate of the middle leaf: its own values in order
  auto const* midLeaf = t.rootNode()->children[1];
  CHECK(midLeaf->agg == m.combine(lift(40), lift(50)));
  // inner aggregate of the root: own values and the inner child only
  CHECK(t.rootNode()->agg ==
        m.combine(m.combine(m.combine(lift(30), lift(40)), lift(50)), lift(60)));
  // left finger: own values then parent's left part (neutral, parent is root)
  CHECK(t.leftFingerNode()->agg == m.combine(lift(10), lift(20)));
  // right finger: parent part (neutral) then own values
  CHECK(t.rightFingerNode()->agg == m.combine(lift(70), lift(80)));
  // whole window in timestamp order
  std::string whole;
  for (Timestamp ts : {10, 20, 30, 40, 50, 60, 70, 80}) whole = m.combine(whole, lift(ts));
  CHECK(t.query() == whole);
}

TEST_CASE("left/right spine aggregates include the parent chain") {
  // three levels so the fingers actually combine a parent aggregate
  using S = Access::Shape;
  S l0{{3, 6}, {}}, l1{{12, 15}, {}}, l2{{22, 25}, {}};
  S r0{{43, 46}, {}}, r1{{52, 55}, {}}, r2{{62, 65}, {}};
  S a{{10, 20}, {l0, l1, l2}};
  S b{{50, 60}, {r0, r1, r2}};
  S root{{40}, {a, b}};
  ConcatMonoid m;
  FingerBTree<ConcatMonoid> t(2, m);
  Access::build(t, root);
  REQUIRE(t.validate().empty());

  auto lift = [&](Timestamp ts) { return m.lift(ts); };
  // left finger holds everything on the left spine and its descendants:
  // own values, then parent's inner+last-child part
  std::string expectLeft = m.combine(lift(3), lift(6));
  std::string parentPart;
  for (Timestamp ts : {std::uint64_t(10), std::uint64_t(12), std::uint64_t(15), std::uint64_t(20),
                       std::uint64_t(22), std::uint64_t(25)})
    parentPart = m.combine(parentPart, lift(ts));
  CHECK(t.leftFingerNode()->agg == expectLeft + parentPart);
  // right finger symmetric: parent part then own values
  std::string expectRightParent;
  for (Timestamp ts : {std::uint64_t(43), std::uint64_t(46), std::uint64_t(50), std::uint64_t(52),
                       std::uint64_t(55), std::uint64_t(60)})
    expectRightParent = m.combine(expectRightParent, lift(ts));
  CHECK(t.rightFingerNode()->agg == expectRightParent + m.combine(lift(62), lift(65)));
  // query covers the full window in timestamp order
  OracleWindow<ConcatMonoid> oracle;
  t.forEachEntry([&](Timestamp ts, std::string const& v) { oracle.insert(ts, v); });
  CHECK(t.query() == oracle.query());
}

TEST_CASE("validate is clean after random single inserts and catches corruption") {
  ConcatMonoid m;
  FingerBTree<ConcatMonoid> t(2, m);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10000; ++i) t.insert(rng() % 60000, m.lift(rng()));
  CHECK(t.validate().empty());

  SUBCASE("corrupted aggregate yields exactly one aggregate violation") {
    auto* mid = Access::mut<ConcatMonoid>(t.rootNode()->children[1]);
    REQUIRE(mid->kind() == AggKind::Up);
    auto saved = mid->agg;
    mid->agg = "corrupt";
    auto viol = t.validate();
    REQUIRE(viol.size() == 1);
    CHECK(viol[0].find("agg: up") != std::string::npos);
    mid->agg = saved;
    CHECK(t.validate().empty());
  }

  SUBCASE("removing an entry breaks the arity invariant") {
    FingerBTree<SumMonoid> t2(3);
    for (std::uint64_t i = 0; i < 200; ++i) t2.insert(i, 1);
    REQUIRE(t2.validate().empty());
    auto* leaf = Access::mut<SumMonoid>(t2.leftFingerNode());
    while (leaf->entries() >= t2.minArity() - 1) {
      leaf->times.pop_back();
      leaf->values.pop_back();
    }
    auto viol = t2.validate();
    bool sawArity = false;
    for (auto const& v : viol) sawArity |= v.find("arity:") != std::string::npos;
    CHECK(sawArity);
  }
}

TEST_CASE("size, oldestTime, youngestTime") {
  FingerBTree<SumMonoid> t(2);
  CHECK(t.size() == 0);
  CHECK(!t.oldestTime().has_value());
  t.insert(5, 1);
  t.insert(3, 1);
  t.insert(9, 1);
  CHECK(t.oldestTime() == 3);
  CHECK(t.youngestTime() == 9);
  t.bulkEvict(5);
  CHECK(t.oldestTime() == 9);
  CHECK(t.size() == 1);
}

TEST_CASE("equal-timestamp insert combines without a duplicate slot") {
  ConcatMonoid m;
  FingerBTree<ConcatMonoid> t(2, m);
  t.insert(7, "a");
  t.insert(7, "b");
  CHECK(t.size() == 1);
  CHECK(t.query() == "ab");
  auto es = t.entries();
  REQUIRE(es.size() == 1);
  CHECK(es[0].first == 7);
  CHECK(es[0].second == "ab");
}

TEST_CASE("evict on empty is a no-op; fill then drain leaves a clean empty tree") {
  FingerBTree<SumMonoid> t(2);
  t.evict();
  CHECK(t.size() == 0);
  std::mt19937_64 rng(3);
  std::vector<Timestamp> keys;
  for (int i = 0; i < 1000; ++i) {
    Timestamp ts = rng() % 100000;
    keys.push_back(ts);
    t.insert(ts, 1);
  }
  for (int i = 0; i < 1000; ++i) t.evict();
  CHECK(t.size() == 0);
  CHECK(t.validate().empty());
  CHECK(t.query() == 0);
}

TEST_CASE("query touches a constant number of nodes") {
  for (int logn : {8, 12}) {
    FingerBTree<SumMonoid> t(2);
    std::vector<FingerBTree<SumMonoid>::Entry> bulk;
    for (std::uint64_t i = 0; i < (std::uint64_t(1) << logn); ++i) bulk.emplace_back(i, 1);
    t.bulkInsert(bulk);
    t.resetCounters();
    (void)t.query();
    CHECK(t.counters().nodesVisited == 3);
    CHECK(t.counters().combines <= std::uint64_t(std::max(2, t.maxArity() - 2)));
  }
}

TEST_CASE("randomized ops keep invariants and match the oracle exactly") {
  for (int minArity : {2, 3}) {
    ConcatMonoid m;
    FingerBTree<ConcatMonoid> t(minArity, m);
    OracleWindow<ConcatMonoid> oracle;
    std::mt19937_64 rng(17 + minArity);
    for (int op = 0; op < 2500; ++op) {
      if (rng() % 10 < 6 || oracle.size() == 0) {
        int mlen = 1 + int(rng() % 32);
        std::vector<std::pair<Timestamp, std::string>> raw;
        Timestamp lo = rng() % 3000;
        for (int i = 0; i < mlen; ++i) raw.emplace_back(lo + rng() % 500, m.lift(rng()));
        auto bulk = sortAndCombine(m, std::move(raw));
        t.bulkInsert(bulk);
        oracle.bulkInsert(bulk);
      } else {
        Timestamp ts = rng() % 4000;
        t.bulkEvict(ts);
        oracle.bulkEvict(ts);
      }
      REQUIRE(t.validate().empty());
      REQUIRE(t.query() == oracle.query());
      REQUIRE(t.size() == oracle.size());
    }
    CHECK(t.entries() == oracle.entries());
  }
}
