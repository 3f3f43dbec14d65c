#include "replay.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

namespace swag::bench {

std::uint64_t Histogram::massAbove(std::uint64_t threshold) const {
  std::uint64_t total = 0;
  for (auto const& [bin, count] : bins_)
    if (binLo(bin) > threshold) total += count;
  return total;
}

std::string Histogram::toCsv() const {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (auto const& [bin, count] : bins_)
    if (count > 0) os << binLo(bin) << ',' << binHi(bin) << ',' << count << '\n';
  return os.str();
}

namespace {

std::vector<std::string> splitCsv(std::string const& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

bool parseDouble(std::string const& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

bool parseReplayRow(std::string const& line, ReplaySpec const& spec, ParsedRow& out) {
  if (line.empty()) return false;
  auto fields = splitCsv(line);
  int needed = std::max(spec.tsCol, spec.valCol);
  if (static_cast<int>(fields.size()) <= needed) return false;

  double ts;
  if (!parseDouble(fields[static_cast<std::size_t>(spec.tsCol)], ts) || ts < 0) return false;
  double scale;
  if (spec.tsUnit == "s")
    scale = 1e6;
  else if (spec.tsUnit == "ms")
    scale = 1e3;
  else if (spec.tsUnit == "us")
    scale = 1.0;
  else
    return false;
  out.ticks = static_cast<Timestamp>(std::llround(ts * scale));

  std::string const& val = fields[static_cast<std::size_t>(spec.valCol)];
  double num;
  if (parseDouble(val, num))
    out.key = static_cast<std::uint64_t>(std::llround(std::fabs(num)));
  else
    out.key = std::hash<std::string>{}(val);
  return true;
}

}  // namespace swag::bench
