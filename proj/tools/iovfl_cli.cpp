// Command-line front end: simulate, classify-areas, verify-contracts, gen-synth.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "iovfl/area_classifier.hpp"
#include "iovfl/config.hpp"
#include "iovfl/contracts.hpp"
#include "iovfl/ingestion.hpp"
#include "iovfl/metrics_io.hpp"
#include "iovfl/sim_harness.hpp"

namespace {

using namespace iovfl;

sim::SimConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  sim::SimConfig cfg = path.empty() ? sim::SimConfig{} : sim::SimConfig::from_file(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& scheduler, std::uint64_t seed, bool seed_given, const std::string& out_path,
                 const std::string& format, const std::string& trace_path, bool strict) {
  auto cfg = load_config(config_path, overrides);
  if (seed_given) cfg.seed = seed;
  std::ofstream trace;
  if (!trace_path.empty()) {
    trace.open(trace_path, std::ios::binary);
    if (!trace) throw std::runtime_error("cannot write contract trace to " + trace_path);
  }
  const auto res =
      sim::run_experiment(cfg, sim::scheduler_from_string(scheduler), trace_path.empty() ? nullptr : &trace);
  sim::emit_metrics(res.rounds, out_path, cfg.num_selected, cfg.num_types, sim::format_from_string(format));
  std::cerr << "simulate: " << res.rounds.size() << " rounds"
            << (res.stopped_early ? " (loss converged)" : "") << ", scheduler " << scheduler << ", seed "
            << cfg.seed << " -> " << out_path << '\n';
  if (!res.all_contracts_converged) {
    std::cerr << "simulate: warning: contract iteration did not converge in some round\n";
    if (strict) return 3;
  }
  return 0;
}

int cmd_classify(const std::string& config_path, const std::string& aadf_path, const std::string& out_path) {
  std::vector<ingest::AreaRecord> records;
  if (!aadf_path.empty()) {
    auto parsed = ingest::parse_aadf_csv(aadf_path);
    std::cerr << "classify-areas: " << parsed.stats.accepted << " rows accepted, " << parsed.stats.skipped
              << " skipped\n";
    for (const auto& w : parsed.stats.warnings) std::cerr << "  " << w << '\n';
    records = std::move(parsed.records);
  } else {
    const auto cfg = load_config(config_path, {});
    records = ingest::synth_generate(cfg.synth).areas;
  }
  const auto part = areas::kmeans_binary(areas::total_aadf(records));
  std::cerr << "classify-areas: " << part.assignments.size() << " areas, " << part.significant_areas().size()
            << " significant, centroids " << part.centroid_low << " / " << part.centroid_high << ", "
            << part.iterations << " iterations\n";
  if (out_path.empty() || out_path == "-") {
    areas::write_partition_csv(std::cout, part);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    areas::write_partition_csv(out, part);
  }
  return 0;
}

int cmd_verify(std::uint64_t seed, int instances, int num_svs, double budget_max, int levels, bool strict) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> zeta_dist(0.1, 1.0);
  const contract::SvCost costs{};
  contract::ContractGrid grid;
  grid.levels_per_dim = levels;
  int failures = 0;
  for (int k = 0; k < instances; ++k) {
    auto profile = contract::VspProfile::linear(10, budget_max, 12.0);
    std::vector<int> ids;
    std::vector<double> zetas;
    for (int n = 0; n < num_svs; ++n) {
      ids.push_back(n + 1);
      zetas.push_back(zeta_dist(rng));
    }
    const auto eq = contract::iterate_to_equilibrium(contract::initial_menus(ids, zetas, profile, costs), profile,
                                                     costs, grid);
    const auto icr = contract::verify_ir_ic(eq.menus, eq.proportions, profile);
    const auto mono = contract::check_monotonicity(eq.menus, eq.proportions, profile);
    double ic_true = std::numeric_limits<double>::infinity();
    const int jt = profile.true_row();
    for (int j = 0; j < profile.num_types(); ++j)
      if (j != jt) ic_true = std::min(ic_true, icr.ic[static_cast<std::size_t>(jt)][static_cast<std::size_t>(j)]);
    const double gain = contract::max_unilateral_gain(eq.menus, profile, costs, grid);
    const bool ok = eq.converged && icr.min_ir >= -contract::kFeasTol && ic_true >= -contract::kFeasTol &&
                    mono.pass() && gain <= grid.gamma;
    failures += !ok;
    std::printf("instance %2d: sweeps %3d %s  min IR %+.3e  IC(true type) %+.3e  full IC %+.3e  monotone %s  "
                "max gain %.2e  %s\n",
                k + 1, eq.iterations, eq.converged ? "conv" : (eq.cycle_length ? "CYCLE" : "MAXIT"), icr.min_ir, ic_true, icr.min_ic,
                mono.pass() ? "yes" : "NO", gain, ok ? "ok" : "FAIL");
  }
  std::printf("%d/%d instances passed IR, true-type IC, monotonicity and equilibrium checks\n",
              instances - failures, instances);
  return strict && failures ? 4 : 0;
}

int cmd_gen_synth(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = load_config(config_path, {});
  const auto data = ingest::synth_generate(cfg.synth);
  std::filesystem::create_directories(out_dir);
  const auto aadf = std::filesystem::path(out_dir) / "aadf.csv";
  const auto acc = std::filesystem::path(out_dir) / "accidents.csv";
  std::ofstream a(aadf), b(acc);
  if (!a || !b) throw std::runtime_error("cannot write into " + out_dir);
  ingest::write_aadf_csv(a, data.areas);
  ingest::write_accident_csv(b, data.accidents);
  std::cerr << "gen-synth: " << data.areas.size() << " AADF rows -> " << aadf.string() << ", "
            << data.accidents.size() << " accidents -> " << acc.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning with vehicle selection and contract incentives"};
  app.require_subcommand(1);

  std::string config_path, scheduler = "lis", out_path, format = "csv", aadf_path, out_dir = ".", trace_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  bool strict = false;
  int instances = 20, num_svs = 5, levels = 21;
  double budget_max = 125.0;

  auto* sim_cmd = app.add_subcommand("simulate", "run one experiment and write per-round metrics");
  sim_cmd->add_option("--config", config_path, "key = value configuration file");
  sim_cmd->add_option("--set", overrides, "override a configuration key (key=value), repeatable");
  sim_cmd->add_option("--scheduler", scheduler, "random | round_robin | ls | lis")->capture_default_str();
  auto* seed_opt = sim_cmd->add_option("--seed", seed, "simulation seed (overrides the config)");
  sim_cmd->add_option("--out", out_path, "metrics output file")->required();
  sim_cmd->add_option("--format", format, "csv | jsonl")->capture_default_str();
  sim_cmd->add_option("--contract-trace", trace_path, "also write every best-response iteration as csv");
  sim_cmd->add_flag("--strict", strict, "exit nonzero if any contract iteration did not converge");

  auto* cls_cmd = app.add_subcommand("classify-areas", "split areas into significant / insignificant");
  cls_cmd->add_option("--config", config_path, "configuration used to synthesise AADF data");
  cls_cmd->add_option("--aadf", aadf_path, "AADF csv (area_id,year,day_of_year,aadf_count)");
  cls_cmd->add_option("--out", out_path, "partition csv (default stdout)");

  auto* ver_cmd = app.add_subcommand("verify-contracts", "solve random contract instances and check them");
  ver_cmd->add_option("--seed", seed)->capture_default_str();
  ver_cmd->add_option("--instances", instances)->capture_default_str();
  ver_cmd->add_option("--num-svs", num_svs)->capture_default_str();
  ver_cmd->add_option("--budget-max", budget_max)->capture_default_str();
  ver_cmd->add_option("--levels", levels, "grid levels per dimension")->capture_default_str();
  ver_cmd->add_flag("--strict", strict, "exit nonzero if any instance fails");

  auto* gen_cmd = app.add_subcommand("gen-synth", "write synthetic aadf.csv and accidents.csv");
  gen_cmd->add_option("--config", config_path, "configuration with synth.* keys");
  gen_cmd->add_option("--out-dir", out_dir)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim_cmd)
      return cmd_simulate(config_path, overrides, scheduler, seed, seed_opt->count() > 0, out_path, format, trace_path, strict);
    if (*cls_cmd) return cmd_classify(config_path, aadf_path, out_path);
    if (*ver_cmd) return cmd_verify(seed, instances, num_svs, budget_max, levels, strict);
    if (*gen_cmd) return cmd_gen_synth(config_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
