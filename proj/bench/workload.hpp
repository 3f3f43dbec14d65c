#pragma once

#include <atomic>
#include <chrono>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stats.hpp"
#include "swag/tree.hpp"

namespace swag::bench {

enum class Mode { EvictOnly, InsertOnly, EvictInsert, SingleOps };

inline char const* modeName(Mode m) {
  switch (m) {
    case Mode::EvictOnly:
      return "evict";
    case Mode::InsertOnly:
      return "insert";
    case Mode::EvictInsert:
      return "both";
    case Mode::SingleOps:
      return "single";
  }
  return "?";
}

/// Synthetic workload controls. Timestamps are dense integer ticks on a
/// fixed grid stride; out-of-order insertion at distance d places each
/// bulk inside the gap behind the d youngest entries, so d is exact.
struct WorkloadSpec {
  std::size_t windowSize = std::size_t(1) << 20;  // n
  std::size_t bulkSize = std::size_t(1) << 10;    // m
  std::size_t oooDistance = 0;                    // d
  Mode mode = Mode::EvictOnly;
  int minArity = 4;
  std::size_t iterations = 1000;
  std::uint64_t seed = 42;
  bool emulateLoop = false;  // loop of single ops instead of native bulk
};

struct RunResult {
  std::vector<LatencyRecord> records;
  StatsSummary summary;
  std::size_t iterationsRun = 0;
};

namespace detail {
inline std::uint64_t elapsedNanos(std::chrono::steady_clock::time_point a,
                                  std::chrono::steady_clock::time_point b) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
}
}  // namespace detail

/// Runs one synthetic workload: prefill the window to n entries, then
/// iterate the mode's loop with only the operation under test inside the
/// timed region. A fence before each timed op keeps the compiler from
/// fusing across stream items.
template <Monoid M>
RunResult runSynthetic(WorkloadSpec const& spec, M monoid = M()) {
  using Clock = std::chrono::steady_clock;
  using Tree = FingerBTree<M>;
  using Entry = typename Tree::Entry;

  if (spec.bulkSize < 1) throw std::invalid_argument("bulkSize must be >= 1");
  if (spec.oooDistance > spec.windowSize)
    throw std::invalid_argument("oooDistance must be <= windowSize");

  std::size_t const n = spec.windowSize;
  std::size_t const m = spec.mode == Mode::SingleOps ? 1 : spec.bulkSize;
  std::size_t const d = spec.oooDistance;
  std::uint64_t const stride = std::uint64_t(1) << 32;

  std::mt19937_64 rng(spec.seed);
  Tree tree(spec.minArity, monoid);
  {
    std::vector<Entry> prefill;
    prefill.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      prefill.emplace_back(std::uint64_t(i) * stride, monoid.lift(rng()));
    tree.bulkInsert(prefill);
  }

  // grid bookkeeping: [oldestIdx, topIdx] are live grid slots; gap
  // insertions (d > 0) never advance the top and must not be consumed by
  // the untimed refill evictions, which caps the iteration count
  std::size_t iterations = spec.iterations;
  bool const gapMode = (spec.mode == Mode::InsertOnly || spec.mode == Mode::EvictInsert ||
                        spec.mode == Mode::SingleOps) &&
                       d > 0;
  if (gapMode) {
    std::size_t maxIters = n > d + m ? (n - d - m) / m : 0;
    if (maxIters == 0) throw std::invalid_argument("window too small for this (m, d)");
    if (iterations > maxIters) iterations = maxIters;
    if ((iterations + 1) * m >= stride) throw std::invalid_argument("iteration count overflows the gap");
  }

  std::uint64_t oldestIdx = 0;
  std::uint64_t topIdx = n - 1;

  RunResult out;
  out.records.reserve(iterations * 2);
  std::uint64_t opIndex = 0;

  auto timed = [&](OpKind kind, auto&& fn) {
    tree.resetCounters();
    std::atomic_thread_fence(std::memory_order_seq_cst);
    auto t0 = Clock::now();
    fn();
    std::atomic_thread_fence(std::memory_order_seq_cst);
    auto t1 = Clock::now();
    out.records.push_back({opIndex++, kind, detail::elapsedNanos(t0, t1),
                           tree.counters().nodesVisited, tree.counters().combines});
  };

  auto bulkEvictOldest = [&]() {
    Timestamp t = (oldestIdx + m - 1) * stride;
    if (spec.emulateLoop) {
      while (tree.size() > 0 && *tree.oldestTime() <= t) tree.evict();
    } else {
      tree.bulkEvict(t);
    }
    oldestIdx += m;
  };

  std::vector<Entry> bulk;
  bulk.reserve(m);
  auto makeInsertBulk = [&](std::size_t iter) {
    bulk.clear();
    if (d == 0) {
      for (std::size_t j = 0; j < m; ++j)
        bulk.emplace_back((topIdx + 1 + j) * stride, monoid.lift(rng()));
      topIdx += m;
    } else {
      // earliest bulk entry lands exactly d entries from the youngest end
      Timestamp base = (topIdx - d) * stride + 1 + std::uint64_t(iter) * m;
      for (std::size_t j = 0; j < m; ++j) bulk.emplace_back(base + j, monoid.lift(rng()));
    }
  };
  auto bulkInsertNew = [&]() {
    if (spec.emulateLoop || spec.mode == Mode::SingleOps) {
      for (auto& e : bulk) tree.insert(e.first, e.second);
    } else {
      tree.bulkInsert(bulk);
    }
  };

  auto wall0 = Clock::now();
  for (std::size_t iter = 0; iter < iterations; ++iter) {
    switch (spec.mode) {
      case Mode::EvictOnly:
        timed(OpKind::Evict, bulkEvictOldest);
        for (std::size_t j = 0; j < m; ++j) tree.insert(++topIdx * stride, monoid.lift(rng()));
        break;
      case Mode::InsertOnly:
        bulkEvictOldest();
        makeInsertBulk(iter);
        timed(OpKind::Insert, bulkInsertNew);
        break;
      case Mode::EvictInsert:
      case Mode::SingleOps:
        timed(OpKind::Evict, bulkEvictOldest);
        makeInsertBulk(iter);
        timed(OpKind::Insert, bulkInsertNew);
        break;
    }
    (void)tree.query();
  }
  auto wall1 = Clock::now();

  double elapsedSec = static_cast<double>(detail::elapsedNanos(wall0, wall1)) / 1e9;
  out.summary = summarize(out.records, iterations * m, elapsedSec);
  out.iterationsRun = iterations;
  return out;
}

}  // namespace swag::bench
