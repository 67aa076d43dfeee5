#pragma once

// Spatio-temporal coverage of each vehicle's data, the information
// significance score built from it, and the top-N pick.

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "iovfl/area_classifier.hpp"
#include "iovfl/ingestion.hpp"

namespace iovfl::selection {

enum class Tier { high, medium, low };

std::string_view to_string(Tier t);
Tier tier_from_string(std::string_view s);

struct SmartVehicle {
  int id = 0;
  int current_area = 0;
  Tier tier = Tier::medium;
  Eigen::MatrixXd eta_cells;  // K x L sample counts (timespan x location)
  std::vector<ingest::AccidentRecord> data_shard;
  double zeta = 0.0;
};

struct VariabilityPair {
  Eigen::MatrixXd actual;
  Eigen::MatrixXd required;
};

/// Vehicles currently in a significant area, input order kept. Throws
/// std::invalid_argument for an area the partition does not know.
std::vector<SmartVehicle> location_filter(std::span<const SmartVehicle> svs,
                                          const areas::AreaPartition& partition);

/// actual = min(eta, required) element-wise.
VariabilityPair build_variability(const Eigen::MatrixXd& eta_cells, const Eigen::MatrixXd& required);

/// 1 - |Y - X|_F / |Y|_F. Throws when Y is all zero.
double info_significance(const VariabilityPair& pair);

/// The n largest-zeta vehicles, ties to the smaller id, sorted by zeta descending.
std::vector<SmartVehicle> select_top_n(std::span<const SmartVehicle> candidates, int n);

/// Histogram of a shard over (day_category, location_id): K = 7 rows, L columns.
/// Records with location_id > L are ignored.
Eigen::MatrixXd eta_from_shard(std::span<const ingest::AccidentRecord> shard, int num_locations);

/// Uniform required-variability target.
Eigen::MatrixXd uniform_required(int rows, int cols, double per_cell);

}  // namespace iovfl::selection
