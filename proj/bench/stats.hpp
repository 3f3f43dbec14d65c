#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace swag::bench {

enum class OpKind { Insert, Evict, Row };

char const* opKindName(OpKind k);

/// One timed operation. Counters are reset per op by the harness.
struct LatencyRecord {
  std::uint64_t opIndex;
  OpKind kind;
  std::uint64_t nanos;
  std::uint64_t nodesVisited;
  std::uint64_t combines;
};

/// Percentiles are nearest-rank on the full sample vector.
struct StatsSummary {
  double meanNanos = 0;
  std::uint64_t medianNanos = 0;
  std::uint64_t p999Nanos = 0;
  std::uint64_t p99999Nanos = 0;
  double throughputItemsPerSec = 0;
  std::uint64_t samples = 0;
};

/// Nearest-rank percentile: the ceil(pct/100 * N)-th smallest sample.
std::uint64_t nearestRank(std::vector<std::uint64_t> samples, double pct);

StatsSummary summarize(std::vector<LatencyRecord> const& records, std::uint64_t items,
                       double elapsedSeconds);

/// CSV text: `op_index,op_kind,nanos,nodes_visited,combines` rows followed
/// by the summary as `#`-prefixed comment lines.
std::string emitStats(std::vector<LatencyRecord> const& records, StatsSummary const& summary);

}  // namespace swag::bench
