#pragma once

// Per-area mean daily traffic and the binary significant/insignificant split.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "iovfl/ingestion.hpp"

namespace iovfl::areas {

using AreaValues = std::map<int, double>;  // area_id -> V_d

/// V_d = sum of all daily counts of area d divided by 365. Throws on empty input.
AreaValues total_aadf(std::span<const ingest::AreaRecord> records);

struct AreaPartition {
  std::map<int, int> assignments;  // area_id -> 0 (insignificant) or 1 (significant)
  double centroid_low = 0.0;
  double centroid_high = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;  // after each assignment step

  bool contains(int area_id) const { return assignments.count(area_id) != 0; }
  /// Throws std::out_of_range for unknown areas.
  bool is_significant(int area_id) const { return assignments.at(area_id) == 1; }
  std::vector<int> significant_areas() const;
};

/// Two-centroid Lloyd iterations starting from min/max. A value equidistant
/// from both centroids joins group 1. `seed` is accepted for interface
/// stability and is not used by the deterministic initialisation.
AreaPartition kmeans_binary(const AreaValues& values, std::uint64_t seed = 0);

/// Sum of squared distances of every value to its assigned centroid.
double kmeans_objective(const AreaValues& values, const AreaPartition& partition);

void write_partition_csv(std::ostream& out, const AreaPartition& partition);

}  // namespace iovfl::areas
