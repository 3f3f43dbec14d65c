#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stats.hpp"
#include "swag/tree.hpp"

namespace swag::bench {

/// Histogram over log-scaled bins: value 0 falls in [0,1), otherwise v
/// lands in [2^k, 2^(k+1)) for k = floor(log2 v).
class Histogram {
 public:
  void add(std::uint64_t v) { ++bins_[binOf(v)]; }

  static int binOf(std::uint64_t v) { return v == 0 ? 0 : std::bit_width(v); }
  static std::uint64_t binLo(int bin) { return bin == 0 ? 0 : std::uint64_t(1) << (bin - 1); }
  static std::uint64_t binHi(int bin) { return std::uint64_t(1) << bin; }

  std::map<int, std::uint64_t> const& bins() const { return bins_; }

  std::uint64_t massAbove(std::uint64_t threshold) const;

  /// `bin_lo,bin_hi,count` rows, ascending, nonzero bins only.
  std::string toCsv() const;

  bool operator==(Histogram const&) const = default;

 private:
  std::map<int, std::uint64_t> bins_;
};

/// Fenwick tree over compressed timestamp indices; tracks the live window
/// so the replay can report each record's out-of-order distance.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t i, std::int64_t delta) {
    for (std::size_t x = i + 1; x < tree_.size(); x += x & (~x + 1)) tree_[x] += delta;
  }
  std::int64_t prefix(std::size_t count) const {  // sum of first `count` slots
    std::int64_t s = 0;
    for (std::size_t x = count; x > 0; x -= x & (~x + 1)) s += tree_[x];
    return s;
  }

 private:
  std::vector<std::int64_t> tree_;
};

struct ReplaySpec {
  std::uint64_t windowDuration = 0;  // ticks
  int minArity = 4;
  int tsCol = 0;
  int valCol = 1;
  std::string tsUnit = "us";  // s | ms | us; input is scaled to integer microsecond ticks
};

struct ParsedRow {
  Timestamp ticks;
  std::uint64_t key;  // numeric value, or a hash of the raw field bytes
};

/// Splits one CSV line and extracts (timestamp, value); false on any
/// malformed field.
bool parseReplayRow(std::string const& line, ReplaySpec const& spec, ParsedRow& out);

struct ReplayResult {
  std::vector<LatencyRecord> records;
  StatsSummary summary;
  Histogram histN, histM, histD;
  std::uint64_t rowsTotal = 0;
  std::uint64_t rowsSkipped = 0;
};

/// Replays a timestamped CSV through a time-based sliding window: for each
/// record, compute the out-of-order distance d, insert, evict everything
/// older than (newest - windowDuration), query, and accumulate histograms
/// of instantaneous n, eviction bulk m, and d. Malformed rows are counted
/// and skipped. Two passes over the input: the first collects timestamps
/// for order-statistics compression.
template <Monoid M>
ReplayResult runReplay(std::istream& in, ReplaySpec const& spec, M monoid = M()) {
  using Clock = std::chrono::steady_clock;
  ReplayResult out;

  std::vector<ParsedRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    ++out.rowsTotal;
    ParsedRow row;
    if (parseReplayRow(line, spec, row))
      rows.push_back(row);
    else
      ++out.rowsSkipped;
  }

  std::vector<Timestamp> allTs;
  allTs.reserve(rows.size());
  for (auto const& r : rows) allTs.push_back(r.ticks);
  std::sort(allTs.begin(), allTs.end());
  allTs.erase(std::unique(allTs.begin(), allTs.end()), allTs.end());
  auto indexOf = [&](Timestamp t) {
    return static_cast<std::size_t>(std::lower_bound(allTs.begin(), allTs.end(), t) -
                                    allTs.begin());
  };

  FingerBTree<M> tree(spec.minArity, monoid);
  Fenwick live(allTs.size());
  std::set<std::size_t> liveIdx;

  out.records.reserve(rows.size());
  auto wall0 = Clock::now();
  std::uint64_t opIndex = 0;
  for (auto const& r : rows) {
    tree.resetCounters();
    auto t0 = Clock::now();

    std::size_t idx = indexOf(r.ticks);
    auto d = static_cast<std::uint64_t>(static_cast<std::int64_t>(liveIdx.size()) -
                                        live.prefix(idx + 1));
    tree.insert(r.ticks, monoid.lift(r.key));
    if (liveIdx.insert(idx).second) live.add(idx, 1);

    std::uint64_t evicted = 0;
    Timestamp newest = *tree.youngestTime();
    if (newest >= spec.windowDuration && spec.windowDuration > 0) {
      Timestamp cutoff = newest - spec.windowDuration;
      tree.bulkEvict(cutoff);
      while (!liveIdx.empty() && allTs[*liveIdx.begin()] <= cutoff) {
        live.add(*liveIdx.begin(), -1);
        liveIdx.erase(liveIdx.begin());
        ++evicted;
      }
    }
    (void)tree.query();

    auto t1 = Clock::now();
    out.records.push_back({opIndex++, OpKind::Row,
                           static_cast<std::uint64_t>(
                               std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()),
                           tree.counters().nodesVisited, tree.counters().combines});
    out.histD.add(d);
    out.histM.add(evicted);
    out.histN.add(liveIdx.size());
  }
  auto wall1 = Clock::now();
  double elapsedSec =
      static_cast<double>(
          std::chrono::duration_cast<std::chrono::nanoseconds>(wall1 - wall0).count()) /
      1e9;
  out.summary = summarize(out.records, out.records.size(), elapsedSec);
  return out;
}

}  // namespace swag::bench
