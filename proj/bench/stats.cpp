#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace swag::bench {

char const* opKindName(OpKind k) {
  switch (k) {
    case OpKind::Insert:
      return "insert";
    case OpKind::Evict:
      return "evict";
    case OpKind::Row:
      return "row";
  }
  return "?";
}

std::uint64_t nearestRank(std::vector<std::uint64_t> samples, double pct) {
  if (samples.empty()) return 0;
  std::sort(samples.begin(), samples.end());
  auto n = static_cast<double>(samples.size());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
  if (rank < 1) rank = 1;
  if (rank > samples.size()) rank = samples.size();
  return samples[rank - 1];
}

StatsSummary summarize(std::vector<LatencyRecord> const& records, std::uint64_t items,
                       double elapsedSeconds) {
  StatsSummary s;
  s.samples = records.size();
  if (!records.empty()) {
    std::vector<std::uint64_t> nanos;
    nanos.reserve(records.size());
    double total = 0;
    for (auto const& r : records) {
      nanos.push_back(r.nanos);
      total += static_cast<double>(r.nanos);
    }
    s.meanNanos = total / static_cast<double>(records.size());
    s.medianNanos = nearestRank(nanos, 50.0);
    s.p999Nanos = nearestRank(nanos, 99.9);
    s.p99999Nanos = nearestRank(std::move(nanos), 99.999);
  }
  if (elapsedSeconds > 0) s.throughputItemsPerSec = static_cast<double>(items) / elapsedSeconds;
  return s;
}

std::string emitStats(std::vector<LatencyRecord> const& records, StatsSummary const& summary) {
  std::ostringstream os;
  os << "op_index,op_kind,nanos,nodes_visited,combines\n";
  for (auto const& r : records)
    os << r.opIndex << ',' << opKindName(r.kind) << ',' << r.nanos << ',' << r.nodesVisited << ','
       << r.combines << '\n';
  os << "# samples " << summary.samples << '\n';
  os << "# mean_ns " << summary.meanNanos << '\n';
  os << "# median_ns " << summary.medianNanos << '\n';
  os << "# p99.9_ns " << summary.p999Nanos << '\n';
  os << "# p99.999_ns " << summary.p99999Nanos << '\n';
  os << "# throughput_items_per_s " << summary.throughputItemsPerSec << '\n';
  return os.str();
}

}  // namespace swag::bench
