#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "swag/monoids.hpp"

using namespace swag;

namespace {

template <typename M>
void checkLaws(M const& m, int samples = 10000) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < samples; ++i) {
    auto a = m.lift(rng() % 1000 + 1);
    auto b = m.lift(rng() % 1000 + 1);
    auto c = m.lift(rng() % 1000 + 1);
    CHECK(m.equals(m.combine(m.combine(a, b), c), m.combine(a, m.combine(b, c))));
    CHECK(m.equals(m.combine(m.identity(), a), a));
    CHECK(m.equals(m.combine(a, m.identity()), a));
  }
}

}  // namespace

TEST_CASE("monoid laws hold for all provided monoids") {
  checkLaws(SumMonoid{});
  checkLaws(MaxMonoid{});
  checkLaws(GeoMeanMonoid{});
  checkLaws(BloomMonoid{}, 2000);  // 1 KiB values; fewer samples, same laws
  checkLaws(ConcatMonoid{});
}

TEST_CASE("combine examples") {
  MaxMonoid mx;
  CHECK(mx.combine(4, mx.combine(2, 5)) == 5);
  ConcatMonoid cat;
  CHECK(cat.combine("ab", "c") == "abc");
  SumMonoid sum;
  CHECK(sum.combine(sum.identity(), 41) == 41);
}

TEST_CASE("fold examples") {
  ConcatMonoid cat;
  CHECK(fold(cat, std::vector<std::string>{}) == cat.identity());
  CHECK(fold(cat, std::vector<std::string>{"a", "b", "c"}) == "abc");
  SumMonoid sum;
  std::vector<std::int64_t> xs{1, 2, 3, 4};
  std::int64_t direct = 0;
  for (auto x : xs) direct += x;
  CHECK(fold(sum, xs) == direct);
  CHECK(fold(sum, xs) == 10);
}

TEST_CASE("concat is order sensitive") {
  ConcatMonoid cat;
  std::string a = "x", b = "y";
  CHECK(cat.combine(a, b) != cat.combine(b, a));
}

TEST_CASE("geomean record combines componentwise and finalizes outside") {
  GeoMeanMonoid g;
  auto a = g.lift(4);
  auto b = g.lift(9);
  auto ab = g.combine(a, b);
  CHECK(ab.count == 2);
  CHECK(ab.logSum == doctest::Approx(std::log(4.0) + std::log(9.0)));
  CHECK(geoMeanFinalize(ab) == doctest::Approx(6.0));  // sqrt(36)
  CHECK(geoMeanFinalize(g.identity()) == 0.0);
}

TEST_CASE("bloom combine is idempotent and commutative") {
  BloomMonoid bm;
  auto a = bm.lift(123456);
  auto b = bm.lift(99999);
  CHECK(bm.equals(bm.combine(a, a), a));
  CHECK(bm.equals(bm.combine(a, b), bm.combine(b, a)));
  int bits = 0;
  for (auto w : a.words) bits += __builtin_popcountll(w);
  CHECK(bits <= BloomMonoid::kHashes);
  CHECK(bits >= 1);
}

#ifndef NDEBUG
TEST_CASE("sum overflow is reported in assertion-enabled builds") {
  SumMonoid sum;
  CHECK_THROWS_AS((void)sum.combine(INT64_MAX, 1), std::overflow_error);
}
#endif
