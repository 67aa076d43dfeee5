#include "iovfl/sv_selection.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace iovfl::selection {

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::high: return "h";
    case Tier::medium: return "m";
    case Tier::low: return "l";
  }
  return "?";
}

Tier tier_from_string(std::string_view s) {
  if (s == "h" || s == "high") return Tier::high;
  if (s == "m" || s == "medium") return Tier::medium;
  if (s == "l" || s == "low") return Tier::low;
  throw std::invalid_argument("unknown tier '" + std::string(s) + "'");
}

std::vector<SmartVehicle> location_filter(std::span<const SmartVehicle> svs,
                                          const areas::AreaPartition& partition) {
  std::vector<SmartVehicle> out;
  for (const auto& sv : svs) {
    if (!partition.contains(sv.current_area))
      throw std::invalid_argument("location_filter: SV " + std::to_string(sv.id) + " is in unknown area " +
                                  std::to_string(sv.current_area));
    if (partition.is_significant(sv.current_area)) out.push_back(sv);
  }
  return out;
}

VariabilityPair build_variability(const Eigen::MatrixXd& eta_cells, const Eigen::MatrixXd& required) {
  if (eta_cells.rows() != required.rows() || eta_cells.cols() != required.cols())
    throw std::invalid_argument("build_variability: shape mismatch");
  if ((eta_cells.array() < 0.0).any() || (required.array() < 0.0).any())
    throw std::invalid_argument("build_variability: negative entries");
  return {eta_cells.cwiseMin(required), required};
}

double info_significance(const VariabilityPair& pair) {
  const double norm_y = pair.required.norm();
  if (!(norm_y > 0.0)) throw std::invalid_argument("info_significance: required matrix is all zero");
  const double z = 1.0 - (pair.required - pair.actual).norm() / norm_y;
  return std::clamp(z, 0.0, 1.0);
}

std::vector<SmartVehicle> select_top_n(std::span<const SmartVehicle> candidates, int n) {
  if (n < 0 || static_cast<std::size_t>(n) > candidates.size())
    throw std::invalid_argument("select_top_n: n=" + std::to_string(n) + " exceeds " +
                                std::to_string(candidates.size()) + " candidates");
  std::vector<SmartVehicle> out(candidates.begin(), candidates.end());
  const auto better = [](const SmartVehicle& a, const SmartVehicle& b) {
    return a.zeta != b.zeta ? a.zeta > b.zeta : a.id < b.id;
  };
  std::partial_sort(out.begin(), out.begin() + n, out.end(), better);
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Eigen::MatrixXd eta_from_shard(std::span<const ingest::AccidentRecord> shard, int num_locations) {
  Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(ingest::kNumDayCategories, num_locations);
  for (const auto& r : shard)
    if (r.location_id >= 1 && r.location_id <= num_locations && r.day_category >= 1 &&
        r.day_category <= ingest::kNumDayCategories)
      eta(r.day_category - 1, r.location_id - 1) += 1.0;
  return eta;
}

Eigen::MatrixXd uniform_required(int rows, int cols, double per_cell) {
  return Eigen::MatrixXd::Constant(rows, cols, per_cell);
}

}  // namespace iovfl::selection
