#include "iovfl/area_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace iovfl::areas {

AreaValues total_aadf(std::span<const ingest::AreaRecord> records) {
  if (records.empty()) throw std::invalid_argument("total_aadf: no records");
  AreaValues sums;
  for (const auto& r : records) sums[r.area_id] += r.aadf_count;
  for (auto& [id, v] : sums) v /= static_cast<double>(ingest::kDaysPerYear);
  return sums;
}

std::vector<int> AreaPartition::significant_areas() const {
  std::vector<int> out;
  for (const auto& [id, g] : assignments)
    if (g == 1) out.push_back(id);
  return out;
}

namespace {

double group_mean(const AreaValues& values, const std::map<int, int>& assign, int group, double fallback) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [id, v] : values)
    if (assign.at(id) == group) {
      sum += v;
      ++count;
    }
  return count ? sum / count : fallback;
}

}  // namespace

AreaPartition kmeans_binary(const AreaValues& values, std::uint64_t /*seed*/) {
  if (values.size() < 2) throw std::invalid_argument("kmeans_binary: need at least 2 areas");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end(),
                                                  [](const auto& a, const auto& b) { return a.second < b.second; });
  if (lo_it->second == hi_it->second)
    throw std::invalid_argument("kmeans_binary: all area values identical");

  AreaPartition p;
  p.centroid_low = lo_it->second;
  p.centroid_high = hi_it->second;
  // Each pass: assign, record objective, update centroids; stop when centroids repeat.
  constexpr int kMaxIterations = 1000;
  while (p.iterations < kMaxIterations) {
    ++p.iterations;
    for (const auto& [id, v] : values)
      p.assignments[id] = std::abs(v - p.centroid_low) < std::abs(v - p.centroid_high) ? 0 : 1;
    p.objective_trace.push_back(kmeans_objective(values, p));
    const double low = group_mean(values, p.assignments, 0, p.centroid_low);
    const double high = group_mean(values, p.assignments, 1, p.centroid_high);
    if (low == p.centroid_low && high == p.centroid_high) break;
    p.centroid_low = low;
    p.centroid_high = high;
  }
  return p;
}

double kmeans_objective(const AreaValues& values, const AreaPartition& partition) {
  double total = 0.0;
  for (const auto& [id, v] : values) {
    const double c = partition.assignments.at(id) == 1 ? partition.centroid_high : partition.centroid_low;
    total += (v - c) * (v - c);
  }
  return total;
}

void write_partition_csv(std::ostream& out, const AreaPartition& partition) {
  out << "area_id,group\n";
  for (const auto& [id, g] : partition.assignments) out << id << ',' << g << '\n';
}

}  // namespace iovfl::areas
