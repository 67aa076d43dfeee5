#pragma once

// Round-by-round simulation: vehicle mobility, scheduling, the contract
// game, local training, aggregation and the profit bookkeeping.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "iovfl/area_classifier.hpp"
#include "iovfl/config.hpp"
#include "iovfl/contracts.hpp"
#include "iovfl/fl_engine.hpp"
#include "iovfl/sv_selection.hpp"

namespace iovfl::sim {

enum class SchedulerKind { random, round_robin, location_significance, location_info_significance };

std::string_view to_string(SchedulerKind k);
/// Accepts random, round_robin, ls / location_significance, lis / location_info_significance.
SchedulerKind scheduler_from_string(std::string_view s);

struct Scheduler {
  SchedulerKind kind = SchedulerKind::random;
  int cursor = 0;  // round-robin position
};

struct RoundMetrics {
  int round = 0;
  std::vector<int> selected_sv_ids;  // in contract order (ascending id)
  std::vector<double> zeta_values;
  std::vector<double> vsp_profit_per_type;
  std::vector<double> sv_profits;  // expected profit per selected vehicle
  std::vector<double> social_welfare_per_type;
  double global_loss = 0.0;
  double accuracy = 0.0;
  double omega = 0.0;
  double net_vsp_profit = 0.0;
  double net_social_welfare = 0.0;
  int contract_iterations = 0;
  bool contract_converged = true;
  int num_candidates = 0;    // |M|, vehicles in significant areas
  bool topped_up = false;    // fewer than N candidates; filled from the rest
};

/// Everything that persists across rounds.
struct SimState {
  SimConfig config;
  areas::AreaPartition partition;
  std::vector<int> area_ids;  // ascending
  int num_locations = 0;
  std::vector<ingest::AccidentRecord> records;
  std::vector<int> train_rows, test_rows;
  fl::FeatureEncoder encoder{1};
  fl::DataShard test_set;
  std::vector<selection::SmartVehicle> svs;
  std::vector<std::vector<int>> shard_rows;  // per vehicle, indices into records
  std::vector<std::vector<int>> round_rows;  // data collected this round
  Eigen::MatrixXd required;
  fl::ModelParams model;
  int round = 0;
  std::ostream* contract_trace = nullptr;  // per-round contract iterations, CSV
};

/// Loads or synthesises the data, classifies areas, assigns tiers and shards,
/// and initialises the model. Deterministic in (config, config.seed).
SimState init_state(const SimConfig& config);

/// Redraws every vehicle's area and collected data for `state.round`.
void observe_vehicles(SimState& state);

/// The N vehicles picked by the scheduler for the current observation.
std::vector<int> schedule(SimState& state, Scheduler& scheduler, int* num_candidates = nullptr,
                          bool* topped_up = nullptr);

RoundMetrics run_round(SimState& state, Scheduler& scheduler);

struct ExperimentResult {
  std::vector<RoundMetrics> rounds;
  bool all_contracts_converged = true;
  bool stopped_early = false;
};

/// When `contract_trace` is set, every round's best-response iterations are
/// appended to it as CSV under a single header.
ExperimentResult run_experiment(const SimConfig& config, SchedulerKind kind,
                                std::ostream* contract_trace = nullptr);

/// Test accuracy of a model trained on the pooled training split; the
/// reference for "best achievable" accuracy.
double centralized_accuracy(const SimConfig& config, int epochs = 20, int batch_size = 128);

}  // namespace iovfl::sim
