// Benchmark CLI: synthetic sliding-window workloads over (n, m, d) and
// replay of timestamped CSV data through a time-based window.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "replay.hpp"
#include "stats.hpp"
#include "swag/monoids.hpp"
#include "workload.hpp"

namespace {

using namespace swag;
using namespace swag::bench;

template <typename Fn>
int withMonoid(std::string const& agg, Fn&& fn) {
  if (agg == "sum") return fn(SumMonoid{});
  if (agg == "max") return fn(MaxMonoid{});
  if (agg == "geomean") return fn(GeoMeanMonoid{});
  if (agg == "bloom") return fn(BloomMonoid{});
  if (agg == "concat") return fn(ConcatMonoid{});
  std::cerr << "unknown aggregator: " << agg << "\n";
  return 2;
}

void printSummary(StatsSummary const& s, std::size_t iters) {
  std::printf("samples            %llu (%zu iterations)\n",
              static_cast<unsigned long long>(s.samples), iters);
  std::printf("mean latency       %.1f ns\n", s.meanNanos);
  std::printf("median latency     %llu ns\n", static_cast<unsigned long long>(s.medianNanos));
  std::printf("p99.9 latency      %llu ns\n", static_cast<unsigned long long>(s.p999Nanos));
  std::printf("p99.999 latency    %llu ns\n", static_cast<unsigned long long>(s.p99999Nanos));
  std::printf("throughput         %.3g items/s\n", s.throughputItemsPerSec);
}

bool writeFile(std::string const& path, std::string const& text) {
  std::ofstream f(path);
  if (!f) {
    std::cerr << "cannot open " << path << " for writing\n";
    return false;
  }
  f << text;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sliding-window aggregation benchmark"};
  app.require_subcommand(1);

  // synthetic
  auto* syn = app.add_subcommand("synthetic", "synthetic (n, m, d) workload");
  std::size_t windowSize = std::size_t(1) << 20;
  std::size_t bulkSize = std::size_t(1) << 10;
  std::size_t oooDistance = 0;
  std::string agg = "sum";
  std::string modeStr = "evict";
  int minArity = 4;
  std::size_t iters = 1000;
  std::uint64_t seed = 42;
  bool emulate = false;
  std::string outFile;
  syn->add_option("--window-size", windowSize, "window size n (entries)");
  syn->add_option("--bulk-size", bulkSize, "bulk size m (entries)");
  syn->add_option("--ooo-distance", oooDistance, "out-of-order distance d (entries)");
  syn->add_option("--agg", agg, "aggregator")
      ->check(CLI::IsMember({"sum", "max", "geomean", "bloom", "concat"}));
  syn->add_option("--mode", modeStr, "which operation is timed")
      ->check(CLI::IsMember({"evict", "insert", "both", "single"}));
  syn->add_option("--min-arity", minArity, "tree MIN_ARITY (>= 2)");
  syn->add_option("--iters", iters, "iterations");
  syn->add_option("--seed", seed, "rng seed");
  syn->add_flag("--emulate-loop", emulate, "emulate bulk ops with loops of single ops");
  syn->add_option("--out", outFile, "write per-op stats CSV to this file");

  // replay
  auto* rep = app.add_subcommand("replay", "replay a timestamped CSV");
  std::string inputFile;
  std::uint64_t windowDuration = 0;
  std::string histPrefix;
  ReplaySpec rspec;
  std::string raggr = "sum";
  rep->add_option("--input", inputFile, "input CSV file")->required();
  rep->add_option("--window-duration", windowDuration, "window duration in ticks")->required();
  rep->add_option("--agg", raggr, "aggregator")
      ->check(CLI::IsMember({"sum", "max", "geomean", "bloom", "concat"}));
  rep->add_option("--hist-out", histPrefix, "write n/m/d histograms to <prefix>{n,m,d}.csv");
  rep->add_option("--ts-col", rspec.tsCol, "timestamp column index");
  rep->add_option("--val-col", rspec.valCol, "value column index");
  rep->add_option("--ts-unit", rspec.tsUnit, "timestamp unit")
      ->check(CLI::IsMember({"s", "ms", "us"}));
  rep->add_option("--min-arity", rspec.minArity, "tree MIN_ARITY (>= 2)");
  std::string repOutFile;
  rep->add_option("--out", repOutFile, "write per-row stats CSV to this file");

  CLI11_PARSE(app, argc, argv);

  if (syn->parsed()) {
    WorkloadSpec spec;
    spec.windowSize = windowSize;
    spec.bulkSize = bulkSize;
    spec.oooDistance = oooDistance;
    spec.minArity = minArity;
    spec.iterations = iters;
    spec.seed = seed;
    spec.emulateLoop = emulate;
    if (modeStr == "evict") spec.mode = Mode::EvictOnly;
    if (modeStr == "insert") spec.mode = Mode::InsertOnly;
    if (modeStr == "both") spec.mode = Mode::EvictInsert;
    if (modeStr == "single") spec.mode = Mode::SingleOps;
    return withMonoid(agg, [&](auto monoid) {
      auto result = runSynthetic(spec, monoid);
      std::printf("synthetic mode=%s n=%zu m=%zu d=%zu agg=%s arity=%d%s\n", modeName(spec.mode),
                  spec.windowSize, spec.bulkSize, spec.oooDistance, agg.c_str(), spec.minArity,
                  spec.emulateLoop ? " (loop emulation)" : "");
      printSummary(result.summary, result.iterationsRun);
      if (!outFile.empty() && !writeFile(outFile, emitStats(result.records, result.summary)))
        return 1;
      return 0;
    });
  }

  rspec.windowDuration = windowDuration;
  return withMonoid(raggr, [&](auto monoid) {
    std::ifstream in(inputFile);
    if (!in) {
      std::cerr << "cannot open " << inputFile << "\n";
      return 1;
    }
    auto result = runReplay(in, rspec, monoid);
    std::printf("replay rows=%llu skipped=%llu agg=%s window=%llu ticks\n",
                static_cast<unsigned long long>(result.rowsTotal),
                static_cast<unsigned long long>(result.rowsSkipped), raggr.c_str(),
                static_cast<unsigned long long>(rspec.windowDuration));
    printSummary(result.summary, result.records.size());
    if (!histPrefix.empty()) {
      if (!writeFile(histPrefix + "n.csv", result.histN.toCsv()) ||
          !writeFile(histPrefix + "m.csv", result.histM.toCsv()) ||
          !writeFile(histPrefix + "d.csv", result.histD.toCsv()))
        return 1;
    }
    if (!repOutFile.empty() && !writeFile(repOutFile, emitStats(result.records, result.summary)))
      return 1;
    return 0;
  });
}
