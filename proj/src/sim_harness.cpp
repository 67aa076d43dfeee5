#include "iovfl/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "iovfl/economics.hpp"

namespace iovfl::sim {
namespace {

// Independent random streams; a stream depends only on the seed and its tag
// and coordinates, never on what other streams consumed.
enum StreamTag : std::uint32_t { kSplit = 1, kTiers, kPartition, kModel, kMobility, kScheduler, kTrain };

std::mt19937_64 stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0) {
  return stream(seed, tag, a, b)();
}

}  // namespace

std::string_view to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::random: return "random";
    case SchedulerKind::round_robin: return "round_robin";
    case SchedulerKind::location_significance: return "ls";
    case SchedulerKind::location_info_significance: return "lis";
  }
  return "?";
}

SchedulerKind scheduler_from_string(std::string_view s) {
  if (s == "random") return SchedulerKind::random;
  if (s == "round_robin" || s == "round-robin") return SchedulerKind::round_robin;
  if (s == "ls" || s == "location_significance") return SchedulerKind::location_significance;
  if (s == "lis" || s == "location_info_significance") return SchedulerKind::location_info_significance;
  throw std::invalid_argument("unknown scheduler '" + std::string(s) + "'");
}

SimState init_state(const SimConfig& config) {
  config.validate();
  SimState st;
  st.config = config;

  ingest::AccidentSchema schema;
  std::vector<ingest::AreaRecord> area_records;
  if (config.synthetic) {
    auto data = ingest::synth_generate(config.synth, schema);
    area_records = std::move(data.areas);
    st.records = std::move(data.accidents);
    st.num_locations = config.synth.num_locations;
  } else {
    if (!config.schema_path.empty()) schema = ingest::AccidentSchema::from_file(config.schema_path);
    area_records = ingest::parse_aadf_csv(config.aadf_path).records;
    st.records = ingest::parse_accident_csv(config.accident_path, schema).records;
    for (const auto& r : st.records) st.num_locations = std::max(st.num_locations, r.location_id);
  }
  if (st.records.empty()) throw std::runtime_error("simulation: no accident records");

  st.partition = areas::kmeans_binary(areas::total_aadf(area_records));
  for (const auto& [id, g] : st.partition.assignments) st.area_ids.push_back(id);

  // Train/test split is a property of the dataset, so it follows the data seed.
  std::vector<int> rows(st.records.size());
  std::iota(rows.begin(), rows.end(), 0);
  auto split_rng = stream(config.synth.seed, kSplit);
  std::shuffle(rows.begin(), rows.end(), split_rng);
  const auto n_test = static_cast<std::size_t>(std::lround(config.test_fraction * static_cast<double>(rows.size())));
  st.test_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
  st.train_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  if (st.train_rows.size() < static_cast<std::size_t>(config.num_svs))
    throw std::runtime_error("simulation: fewer training samples than vehicles");

  st.encoder = fl::FeatureEncoder(st.num_locations, schema);
  st.test_set = st.encoder.encode(st.records, st.test_rows);

  // Tiers: fixed counts, shuffled over vehicle ids.
  const int I = config.num_svs;
  const int n_high = static_cast<int>(std::lround(config.tier_high_fraction * I));
  const int n_low = std::min(I - n_high, static_cast<int>(std::lround(config.tier_low_fraction * I)));
  std::vector<selection::Tier> tiers(static_cast<std::size_t>(I), selection::Tier::medium);
  std::fill_n(tiers.begin(), n_high, selection::Tier::high);
  std::fill_n(tiers.end() - n_low, n_low, selection::Tier::low);
  auto tier_rng = stream(config.seed, kTiers);
  std::shuffle(tiers.begin(), tiers.end(), tier_rng);

  std::vector<int> train_labels;
  for (const int r : st.train_rows) train_labels.push_back(st.records[static_cast<std::size_t>(r)].severity);
  const auto parts = fl::partition_data(train_labels, tiers, config.partition, derive_seed(config.seed, kPartition),
                                        config.tier_weights, config.noniid_pieces);
  for (int i = 0; i < I; ++i) {
    selection::SmartVehicle sv;
    sv.id = i + 1;
    sv.tier = tiers[static_cast<std::size_t>(i)];
    sv.current_area = st.area_ids.front();
    std::vector<int> shard;
    for (const int k : parts[static_cast<std::size_t>(i)]) shard.push_back(st.train_rows[static_cast<std::size_t>(k)]);
    st.shard_rows.push_back(std::move(shard));
    st.svs.push_back(std::move(sv));
  }
  st.round_rows.resize(st.svs.size());
  st.required = selection::uniform_required(ingest::kNumDayCategories, st.num_locations, config.required_per_cell);

  std::vector<int> widths{st.encoder.width()};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(fl::kNumClasses);
  st.model = fl::init_model(widths, derive_seed(config.seed, kModel));
  return st;
}

void observe_vehicles(SimState& st) {
  auto rng = stream(st.config.seed, kMobility, static_cast<std::uint64_t>(st.round));
  std::uniform_int_distribution<std::size_t> pick_area(0, st.area_ids.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < st.svs.size(); ++i) {
    auto& sv = st.svs[i];
    sv.current_area = st.area_ids[pick_area(rng)];
    const Range r = st.config.collect_range(sv.tier);
    double fraction = r.lo + (r.hi - r.lo) * unit(rng);
    if (!st.partition.is_significant(sv.current_area)) fraction *= st.config.insignificant_collect_factor;

    auto pool = st.shard_rows[i];
    std::shuffle(pool.begin(), pool.end(), rng);
    auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool.size())));
    if (fraction > 0.0 && !pool.empty()) count = std::clamp<std::size_t>(count, 1, pool.size());
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    st.round_rows[i] = std::move(pool);

    sv.data_shard.clear();
    for (const int row : st.round_rows[i]) sv.data_shard.push_back(st.records[static_cast<std::size_t>(row)]);
    sv.eta_cells = selection::eta_from_shard(sv.data_shard, st.num_locations);
    sv.zeta = selection::info_significance(selection::build_variability(sv.eta_cells, st.required));
  }
}

std::vector<int> schedule(SimState& st, Scheduler& scheduler, int* num_candidates, bool* topped_up) {
  const int N = st.config.num_selected;
  const int I = static_cast<int>(st.svs.size());
  auto rng = stream(st.config.seed, kScheduler, static_cast<std::uint64_t>(st.round));
  std::vector<int> chosen;  // indices into st.svs
  int m_count = I;
  bool top = false;

  auto random_pick = [&](std::vector<int> pool, int k) {
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  };
  auto by_zeta = [&](const std::vector<int>& pool, int k) {
    std::vector<selection::SmartVehicle> cands;
    for (const int i : pool) cands.push_back(st.svs[static_cast<std::size_t>(i)]);
    std::vector<int> out;
    for (const auto& sv : selection::select_top_n(cands, k)) out.push_back(sv.id - 1);
    return out;
  };

  switch (scheduler.kind) {
    case SchedulerKind::random: {
      std::vector<int> all(static_cast<std::size_t>(I));
      std::iota(all.begin(), all.end(), 0);
      chosen = random_pick(all, N);
      break;
    }
    case SchedulerKind::round_robin:
      for (int k = 0; k < N; ++k) chosen.push_back((scheduler.cursor + k) % I);
      scheduler.cursor = (scheduler.cursor + N) % I;
      break;
    case SchedulerKind::location_significance:
    case SchedulerKind::location_info_significance: {
      std::vector<int> in, out;
      const auto filtered = selection::location_filter(st.svs, st.partition);
      std::vector<char> mark(static_cast<std::size_t>(I), 0);
      for (const auto& sv : filtered) mark[static_cast<std::size_t>(sv.id - 1)] = 1;
      for (int i = 0; i < I; ++i) (mark[static_cast<std::size_t>(i)] ? in : out).push_back(i);
      m_count = static_cast<int>(in.size());
      const bool lis = scheduler.kind == SchedulerKind::location_info_significance;
      if (m_count >= N) {
        chosen = lis ? by_zeta(in, N) : random_pick(in, N);
      } else {
        top = true;
        chosen = in;
        const auto extra = lis ? by_zeta(out, N - m_count) : random_pick(out, N - m_count);
        chosen.insert(chosen.end(), extra.begin(), extra.end());
      }
      break;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  if (num_candidates) *num_candidates = m_count;
  if (topped_up) *topped_up = top;
  return chosen;
}

RoundMetrics run_round(SimState& st, Scheduler& scheduler) {
  const auto& cfg = st.config;
  RoundMetrics m;
  m.round = st.round;
  try {
    observe_vehicles(st);
    const auto chosen = schedule(st, scheduler, &m.num_candidates, &m.topped_up);

    // Contract game.
    const auto profile = cfg.profile();
    const auto costs = cfg.costs();
    for (const int i : chosen) {
      m.selected_sv_ids.push_back(st.svs[static_cast<std::size_t>(i)].id);
      m.zeta_values.push_back(st.svs[static_cast<std::size_t>(i)].zeta);
    }
    const auto eq = contract::iterate_to_equilibrium(
        contract::initial_menus(m.selected_sv_ids, m.zeta_values, profile, costs), profile, costs, cfg.grid);
    m.contract_iterations = eq.iterations;
    m.contract_converged = eq.converged;
    if (st.contract_trace) contract::write_contract_trace(*st.contract_trace, m.round, eq, profile, costs, false);
    const int J = profile.num_types();
    for (int j = 0; j < J; ++j) {
      m.vsp_profit_per_type.push_back(contract::vsp_profit_using_row(j, j, eq.menus, eq.proportions, profile));
      m.social_welfare_per_type.push_back(contract::social_welfare(j, eq.menus, eq.proportions, costs, profile));
    }
    for (std::size_t n = 0; n < chosen.size(); ++n)
      m.sv_profits.push_back(contract::expected_sv_profit(static_cast<int>(n), eq.menus, eq.proportions, profile, costs));

    // Local training and aggregation.
    std::vector<fl::ModelParams> locals;
    std::vector<double> etas, losses;
    for (const int i : chosen) {
      const auto& rows = st.round_rows[static_cast<std::size_t>(i)];
      if (rows.empty()) continue;
      const auto shard = st.encoder.encode(st.records, rows);
      const auto seed = derive_seed(cfg.seed, kTrain, static_cast<std::uint64_t>(st.round),
                                    static_cast<std::uint64_t>(st.svs[static_cast<std::size_t>(i)].id));
      auto local = fl::local_train(st.model, shard, cfg.adam, cfg.tau_th, cfg.batch_size, seed);
      losses.push_back(fl::shard_loss(local.model, shard));
      etas.push_back(shard.size());
      locals.push_back(std::move(local.model));
    }
    if (!locals.empty()) {
      st.model = fl::fed_avg(locals, etas);
      m.global_loss = fl::global_loss(losses);
    }
    m.accuracy = fl::accuracy(st.model, st.test_set);

    m.omega = econ::model_value(m.accuracy, st.round, cfg.freshness);
    const int jt = profile.true_row();
    m.net_vsp_profit = econ::net_vsp_profit(jt, eq.menus, eq.proportions, profile, m.omega);
    m.net_social_welfare = econ::net_social_welfare(jt, eq.menus, eq.proportions, profile, costs, m.omega);
  } catch (const std::exception& e) {
    throw std::runtime_error("round " + std::to_string(st.round) + ": " + e.what());
  }
  ++st.round;
  return m;
}

ExperimentResult run_experiment(const SimConfig& config, SchedulerKind kind, std::ostream* contract_trace) {
  ExperimentResult res;
  if (config.rounds == 0) {
    config.validate();
    return res;
  }
  SimState st = init_state(config);
  if (contract_trace) {
    *contract_trace << "round,iteration,sv_id,type_index,zeta,phi,sv_profit,vsp_profit\n";
    st.contract_trace = contract_trace;
  }
  Scheduler scheduler{kind, 0};
  const int w = config.stop_window;
  auto window_mean = [&](std::size_t end) {
    double s = 0.0;
    for (std::size_t k = end - static_cast<std::size_t>(w); k < end; ++k) s += res.rounds[k].global_loss;
    return s / w;
  };
  for (int t = 0; t < config.rounds; ++t) {
    res.rounds.push_back(run_round(st, scheduler));
    res.all_contracts_converged = res.all_contracts_converged && res.rounds.back().contract_converged;
    const std::size_t done = res.rounds.size();
    if (config.early_stop && done >= static_cast<std::size_t>(w) + 1) {
      const double now = window_mean(done), before = window_mean(done - 1);
      if (before != 0.0 && std::abs(now - before) / std::abs(before) < config.stop_threshold) {
        res.stopped_early = done < static_cast<std::size_t>(config.rounds);
        break;
      }
    }
  }
  return res;
}

double centralized_accuracy(const SimConfig& config, int epochs, int batch_size) {
  const SimState st = init_state(config);
  const auto train = st.encoder.encode(st.records, st.train_rows);
  fl::ModelParams model = st.model;
  auto adam = fl::AdamState::fresh(model, config.adam);
  std::vector<int> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  auto rng = stream(config.seed, kTrain, ~0ull);
  double best = fl::accuracy(model, st.test_set);
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
      const std::size_t len = std::min(order.size() - at, static_cast<std::size_t>(batch_size));
      fl::DataShard batch;
      batch.features.resize(static_cast<Eigen::Index>(len), train.features.cols());
      batch.labels.resize(static_cast<Eigen::Index>(len), train.labels.cols());
      for (std::size_t k = 0; k < len; ++k) {
        batch.features.row(static_cast<Eigen::Index>(k)) = train.features.row(order[at + k]);
        batch.labels.row(static_cast<Eigen::Index>(k)) = train.labels.row(order[at + k]);
      }
      fl::adam_step(adam, fl::gradient(model, batch), model);
    }
    best = std::max(best, fl::accuracy(model, st.test_set));
  }
  return best;
}

}  // namespace iovfl::sim
