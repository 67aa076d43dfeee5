#pragma once

// Simulation settings read from a flat `key = value` file.
//
// Monetary parameters quoted per 0.1 of significance use a `_per_tenth`
// suffix and are stored per unit (x10); see config/default.conf.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iovfl/contracts.hpp"
#include "iovfl/economics.hpp"
#include "iovfl/fl_engine.hpp"
#include "iovfl/ingestion.hpp"

namespace iovfl::sim {

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

struct SimConfig {
  // population and selection
  int num_svs = 100;       // I
  int num_selected = 10;   // N
  double tier_high_fraction = 1.0 / 3.0;
  double tier_low_fraction = 1.0 / 3.0;  // medium gets the rest
  fl::TierWeights tier_weights;
  Range collect_high{0.7, 1.0};
  Range collect_medium{0.4, 0.7};
  Range collect_low{0.1, 0.4};
  double insignificant_collect_factor = 0.5;
  double required_per_cell = 1.0;

  // contract game
  int num_types = 10;                 // J; theta_j = j unless `types` is given
  std::vector<double> types;
  std::vector<double> distribution;   // empty means uniform
  int true_type = 0;                  // 1-based; 0 means J
  double budget_max = 250.0;
  double lambda = 12.0;
  double price_unit = 21.0;
  double xi = 5.0;
  contract::ContractGrid grid;

  // learning
  int rounds = 30;  // t_th
  int tau_th = 5;
  int batch_size = 10000;
  std::vector<int> hidden{128, 64};
  fl::AdamConfig adam;
  double test_fraction = 0.2;
  fl::PartitionMode partition = fl::PartitionMode::noniid;
  int noniid_pieces = 2;  // label runs per vehicle under noniid
  bool early_stop = true;
  int stop_window = 3;
  double stop_threshold = 1e-3;

  // economics
  econ::FreshnessParams freshness;

  // data
  bool synthetic = true;
  ingest::SynthConfig synth;
  std::filesystem::path aadf_path, accident_path, schema_path;

  std::uint64_t seed = 1;

  static SimConfig from_file(const std::filesystem::path& path);
  /// Applies one key; throws std::invalid_argument on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  void validate() const;

  contract::VspProfile profile() const;
  contract::SvCost costs() const { return {xi, price_unit}; }
  Range collect_range(selection::Tier t) const;

  /// Every key with its current value, in file order.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

}  // namespace iovfl::sim
