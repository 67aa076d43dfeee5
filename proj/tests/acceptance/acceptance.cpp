// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "iovfl/contracts.hpp"
#include "iovfl/economics.hpp"
#include "iovfl/fl_engine.hpp"
#include "iovfl/sim_harness.hpp"

namespace {

using namespace iovfl;
using Clock = std::chrono::steady_clock;

const std::filesystem::path kConfigDir = IOVFL_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- contract instances shared by criteria 1-3 --------------------------------

struct SolvedInstance {
  contract::VspProfile profile;
  contract::EquilibriumResult eq;
};

std::vector<SolvedInstance> g_instances;
double g_instances_seconds = 0.0;

const std::vector<SolvedInstance>& contract_instances() {
  if (!g_instances.empty()) return g_instances;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> zeta(0.1, 1.0);
  const contract::SvCost costs{5.0, 21.0};
  const contract::ContractGrid grid;
  for (int k = 0; k < 20; ++k) {
    const int N = k % 2 ? 10 : 5;
    const double budget = (k / 2) % 2 ? 250.0 : 125.0;
    SolvedInstance s{contract::VspProfile::linear(10, budget, 12.0), {}};
    std::vector<int> ids;
    std::vector<double> zc;
    for (int n = 0; n < N; ++n) {
      ids.push_back(n + 1);
      zc.push_back(zeta(rng));
    }
    s.eq = contract::iterate_to_equilibrium(contract::initial_menus(ids, zc, s.profile, costs), s.profile, costs,
                                            grid);
    g_instances.push_back(std::move(s));
  }
  g_instances_seconds = seconds_since(t0);
  return g_instances;
}

int converged_count() {
  int c = 0;
  for (const auto& s : contract_instances()) c += s.eq.converged;
  return c;
}

Outcome criterion_ir() {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& s : contract_instances())
    for (int j = 0; j < s.profile.num_types(); ++j)
      worst = std::min(worst, contract::vsp_profit_using_row(j, j, s.eq.menus, s.eq.proportions, s.profile));
  const bool ok = worst >= -1e-9 && g_instances_seconds < 60.0;
  return {ok, fmt("min VSP profit %.3e over 20 instances x 10 types, %d/20 converged, %.1f s", worst,
                  converged_count(), g_instances_seconds)};
}

Outcome criterion_ic() {
  double worst = std::numeric_limits<double>::infinity();
  int ok_count = 0;
  for (const auto& s : contract_instances()) {
    const auto r = contract::verify_ir_ic(s.eq.menus, s.eq.proportions, s.profile);
    const int t = s.profile.true_row();
    double m = std::numeric_limits<double>::infinity();
    for (int k = 0; k < s.profile.num_types(); ++k)
      if (k != t) m = std::min(m, r.ic[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]);
    worst = std::min(worst, m);
    ok_count += m >= -1e-9;
  }
  return {ok_count == 20, fmt("true-type margin min %.3e, %d/20 instances", worst, ok_count)};
}

Outcome criterion_monotone() {
  int ok_count = 0;
  double worst = 0.0;
  for (const auto& s : contract_instances()) {
    const auto r = contract::check_monotonicity(s.eq.menus, s.eq.proportions, s.profile, 1e-9);
    ok_count += r.pass();
    worst = std::min(worst, r.worst_gap);
  }
  return {ok_count == 20, fmt("%d/20 equilibria monotone in zeta, phi and profit, worst step %.3e", ok_count, worst)};
}

Outcome criterion_ldic() {
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<int> jd(2, 6), nd(1, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0), price(0.0, 30.0);
  int accepted = 0, full_pass = 0, down_pass = 0, counts_ok = 0, attempts = 0;
  while (accepted < 100 && attempts < 200000) {
    ++attempts;
    const int J = jd(rng), N = nd(rng);
    const auto profile = contract::VspProfile::linear(J, u(rng) < 0.5 ? 125.0 : 250.0, 12.0);
    std::vector<contract::ContractMenu> menus(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
      auto& m = menus[static_cast<std::size_t>(n)];
      m.sv_id = n + 1;
      for (int j = 0; j < J; ++j) {
        m.zeta.push_back(u(rng));
        m.phi.push_back(price(rng));
      }
      std::sort(m.zeta.begin(), m.zeta.end());
      std::sort(m.phi.begin(), m.phi.end());
      m.zeta_collected = m.zeta.back();
    }
    const auto props = contract::solve_payment_proportions(menus, profile);
    const auto reduced = contract::check_reduced(0, menus, props, profile);
    if (!reduced.feasible) continue;
    ++accepted;
    const auto full = contract::check_full(menus, props, profile);
    full_pass += full.feasible;
    const auto ic = contract::verify_ir_ic(menus, props, profile);
    bool down = ic.min_ir >= -1e-9;
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < j; ++k) down = down && ic.ic[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] >= -1e-9;
    down_pass += down;
    counts_ok += reduced.evaluations == 3 * J - 1 && full.evaluations == J * J + J;
  }
  const bool ok = accepted == 100 && full_pass == 100 && counts_ok == 100;
  return {ok, fmt("%d/%d menus passing IR(type 1)+LDIC also pass full IR+IC (%d/%d pass IR + "
                  "downward IC); constraint counts 3J-1 / J^2+J correct on %d/%d",
                  full_pass, accepted, down_pass, accepted, counts_ok, accepted)};
}

Outcome criterion_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> zeta(0.1, 1.0);
  contract::ContractGrid grid;
  grid.levels_per_dim = 5;
  const contract::SvCost costs{5.0, 21.0};
  int matched = 0;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const auto profile = contract::VspProfile::linear(2, k % 2 ? 125.0 : 12.5, 12.0);
    const std::vector<int> ids{1, 2};
    const std::vector<double> zc{zeta(rng), zeta(rng)};
    const auto base = contract::initial_menus(ids, zc, profile, costs);
    const auto eq = contract::iterate_to_equilibrium(base, profile, costs, grid);
    const auto oracle = contract::brute_force_equilibrium(base, profile, costs, grid);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : oracle) {
      double d = 0.0;
      for (int n = 0; n < 2; ++n)
        d = std::max(d, std::abs(o.profits[static_cast<std::size_t>(n)] -
                                 contract::expected_sv_profit(n, eq.menus, eq.proportions, profile, costs)));
      best = std::min(best, d);
    }
    worst = std::max(worst, best);
    matched += eq.converged && best <= grid.gamma;
  }
  const double secs = seconds_since(t0);
  return {matched == 10 && secs < 120.0,
          fmt("%d/10 instances within 1e-6 of a brute-force equilibrium (worst %.2e), %.1f s", matched, worst, secs)};
}

double row_value(double a, const std::vector<double>& z, const std::vector<double>& p, const std::vector<double>& r) {
  double x = 0.0, c = 0.0;
  for (std::size_t n = 0; n < r.size(); ++n) {
    x += r[n] * z[n];
    c += r[n] * p[n];
  }
  return a * std::sqrt(x) - c;
}

Outcome criterion_p1() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> za(0.05, 1.0), pa(0.5, 30.0), ba(0.5, 30.0), th(1.0, 10.0);
  const double lambda = 12.0;
  double worst_grid = 0.0;
  int grid_ok = 0;
  for (int k = 0; k < 20; ++k) {
    const double a = th(rng) * lambda / 4.0, b = ba(rng);
    const std::vector<double> z{za(rng), za(rng)}, p{pa(rng), pa(rng)};
    const auto r = contract::solve_row(a, z, p, b);
    const double f = row_value(a, z, p, r);
    double g = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 100; ++i)
      for (int j = 0; j <= 100; ++j) {
        const std::vector<double> q{i / 100.0, j / 100.0};
        if (q[0] * p[0] + q[1] * p[1] <= b) g = std::max(g, row_value(a, z, p, q));
      }
    // The exact solver may beat the grid; it must never fall short of it.
    worst_grid = std::max(worst_grid, g - f);
    grid_ok += f >= g - 1e-6 && r[0] * p[0] + r[1] * p[1] <= b + 1e-9;
  }
  double worst_closed = 0.0;
  int closed_ok = 0;
  for (int k = 0; k < 20; ++k) {
    const double theta = th(rng), zeta = za(rng), phi = pa(rng), b = ba(rng);
    double expect = std::min(1.0, std::pow(theta * lambda, 2) * zeta / (4.0 * phi * phi));
    expect = std::min(expect, b / phi);
    const double got = contract::solve_row(theta * lambda, std::vector<double>{zeta}, std::vector<double>{phi}, b)[0];
    worst_closed = std::max(worst_closed, std::abs(got - expect));
    closed_ok += std::abs(got - expect) <= 1e-8;
  }
  return {grid_ok == 20 && closed_ok == 20,
          fmt("N=2: %d/20 at least the 101^2 grid optimum - 1e-6 (max shortfall %.2e); N=1 closed form %d/20 "
              "(max err %.2e)",
              grid_ok, worst_grid, closed_ok, worst_closed)};
}

Outcome criterion_fl() {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> g(0.0, 5.0);
  Eigen::MatrixXd logits(200, 3);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = g(rng);
  const double sum_err = (fl::softmax_rows(logits).rowwise().sum().array() - 1.0).abs().maxCoeff();

  double worst_fd = 0.0;
  std::uniform_int_distribution<int> label(0, 2);
  for (int k = 0; k < 20; ++k) {
    auto m = fl::init_model({4, 2, 3}, 1000 + k);
    fl::DataShard s;
    s.features = Eigen::MatrixXd::NullaryExpr(5, 4, [&] { return g(rng) / 5.0; });
    s.labels = Eigen::MatrixXd::Zero(5, 3);
    for (int i = 0; i < 5; ++i) s.labels(i, label(rng)) = 1.0;
    const auto grads = fl::gradient(m, s);
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < m.layers.size(); ++l)
      for (Eigen::Index i = 0; i < m.layers[l].size(); ++i) {
        auto up = m, down = m;
        up.layers[l](i) += 1e-6;
        down.layers[l](i) -= 1e-6;
        const double fd = (fl::shard_loss(up, s) - fl::shard_loss(down, s)) / 2e-6;
        num += std::pow(fd - grads[l](i), 2);
        den += fd * fd;
      }
    worst_fd = std::max(worst_fd, std::sqrt(num / den));
  }

  fl::ModelParams w;
  w.layers.push_back(Eigen::MatrixXd::Zero(1, 1));
  auto st = fl::AdamState::fresh(w, fl::AdamConfig{});
  fl::adam_step(st, {Eigen::MatrixXd::Constant(1, 1, 1.0)}, w);
  // Hand evaluation: p = 0.1, q = 0.001, kappa = 0.01 sqrt(0.001) / 0.1, so
  // dW = -0.01 sqrt(0.001) / (sqrt(0.001) + 1e-8) = -9.9999968377e-3, which
  // rounds to -9.99999e-3 at six figures.
  const double adam_expected = -9.9999968377e-3;
  const double adam_err = std::abs(w.layers[0](0, 0) - adam_expected);

  const auto model = fl::init_model({6, 5, 3}, 5);
  const std::vector<fl::ModelParams> one{model};
  const auto avg = fl::fed_avg(one, std::vector<double>{17.0});
  double avg_err = 0.0;
  for (std::size_t l = 0; l < model.layers.size(); ++l)
    avg_err = std::max(avg_err, (avg.layers[l] - model.layers[l]).cwiseAbs().maxCoeff());

  const bool ok = sum_err <= 1e-9 && worst_fd < 1e-4 && adam_err <= 1e-9 && avg_err <= 1e-12;
  return {ok, fmt("softmax row-sum err %.1e; backprop vs FD rel err max %.1e; Adam dW %.10e (err %.1e); "
                  "fed_avg identity err %.1e",
                  sum_err, worst_fd, w.layers[0](0, 0), adam_err, avg_err)};
}

// ---- simulation criteria -----------------------------------------------------

struct SimRuns {
  bool done = false;
  double target = 0.0, best = 0.0;
  std::vector<std::vector<sim::RoundMetrics>> lis, random;
  std::vector<double> ls_first_sw;
  double seconds = 0.0;
};

SimRuns g_sims;

sim::SimConfig default_config() {
  auto cfg = sim::SimConfig::from_file(kConfigDir / "default.conf");
  cfg.validate();
  return cfg;
}

const SimRuns& simulations() {
  if (g_sims.done) return g_sims;
  const auto t0 = Clock::now();
  const auto cfg = default_config();
  g_sims.best = sim::centralized_accuracy(cfg);
  g_sims.target = 0.85 * g_sims.best;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto c = cfg;
    c.seed = seed;
    g_sims.lis.push_back(sim::run_experiment(c, sim::SchedulerKind::location_info_significance).rounds);
    g_sims.random.push_back(sim::run_experiment(c, sim::SchedulerKind::random).rounds);
    auto first = c;
    first.rounds = 1;
    const auto ls = sim::run_experiment(first, sim::SchedulerKind::location_significance).rounds;
    g_sims.ls_first_sw.push_back(ls.at(0).social_welfare_per_type.at(static_cast<std::size_t>(c.profile().true_row())));
  }
  g_sims.seconds = seconds_since(t0);
  g_sims.done = true;
  return g_sims;
}

int rounds_to_reach(const std::vector<sim::RoundMetrics>& m, double target) {
  for (const auto& r : m)
    if (r.accuracy >= target) return r.round + 1;
  return std::numeric_limits<int>::max();
}

Outcome criterion_speed() {
  const auto& s = simulations();
  int wins = 0;
  std::string per;
  for (std::size_t k = 0; k < s.lis.size(); ++k) {
    const int a = rounds_to_reach(s.lis[k], s.target), b = rounds_to_reach(s.random[k], s.target);
    wins += a < b;
    auto show = [](int x) { return x == std::numeric_limits<int>::max() ? std::string("-") : std::to_string(x); };
    per += " " + show(a) + "/" + show(b);
  }
  // The simulation runs also feed criteria 9 and 10; their time counts here.
  return {wins >= 8 && s.seconds < 600.0,
          fmt("LIS faster in %d/10 seeds (target %.4f = 0.85 x %.4f; rounds LIS/random:%s), %.0f s", wins, s.target,
              s.best, per.c_str(), s.seconds)};
}

Outcome criterion_welfare() {
  const auto& s = simulations();
  const auto jt = static_cast<std::size_t>(default_config().profile().true_row());
  int wins = 0;
  std::string per;
  for (std::size_t k = 0; k < s.lis.size(); ++k) {
    const double a = s.lis[k].at(0).social_welfare_per_type.at(jt);
    const double b = s.ls_first_sw[k];
    const double c = s.random[k].at(0).social_welfare_per_type.at(jt);
    wins += a >= b && b >= c;
    per += fmt(" %.0f/%.0f/%.0f", a, b, c);
  }
  return {wins >= 8, fmt("LIS >= LS >= random in %d/10 seeds (LIS/LS/random:%s)", wins, per.c_str())};
}

Outcome criterion_peak() {
  const auto& s = simulations();
  int wins = 0;
  std::string per;
  for (const auto& run : s.lis) {
    const auto it = std::max_element(run.begin(), run.end(),
                                     [](const auto& x, const auto& y) { return x.net_vsp_profit < y.net_vsp_profit; });
    const int arg = it->round;
    wins += arg > 0 && arg < static_cast<int>(run.size()) - 1;
    per += " " + std::to_string(arg);
  }
  return {wins >= 8, fmt("interior argmax in %d/10 seeds over %zu rounds (argmax:%s)", wins, s.lis.at(0).size(),
                         per.c_str())};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome criterion_determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "iovfl_acceptance_det";
  std::filesystem::create_directories(dir);
  const std::string conf = (kConfigDir / "default.conf").string();
  int same = 0, total = 0;
  for (const std::string sched : {"random", "round_robin", "ls", "lis"})
    for (const std::string format : {"csv", "jsonl"}) {
      if (format == "jsonl" && sched != "lis") continue;
      std::string files[2];
      bool ran = true;
      for (int k = 0; k < 2; ++k) {
        files[k] = (dir / (sched + "_" + std::to_string(k) + "." + format)).string();
        const std::string cmd = std::string(IOVFL_CLI_PATH) + " simulate --config " + conf +
                                " --set rounds=3 --scheduler " + sched + " --seed 7 --format " + format + " --out " +
                                files[k] + " 2>/dev/null";
        ran = ran && std::system(cmd.c_str()) == 0;
      }
      ++total;
      const auto a = read_file(files[0]);
      same += ran && !a.empty() && a == read_file(files[1]);
    }
  std::filesystem::remove_all(dir);
  return {same == total, fmt("%d/%d simulate invocations byte-identical across two runs", same, total)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "IR validity", criterion_ir},
      {2, "IC validity", criterion_ic},
      {3, "monotonicity", criterion_monotone},
      {4, "LDIC implies IC", criterion_ldic},
      {5, "equilibrium oracle", criterion_oracle},
      {6, "payment-proportion solver", criterion_p1},
      {7, "FL numerics", criterion_fl},
      {8, "convergence-speed ordering", criterion_speed},
      {9, "social-welfare ordering", criterion_welfare},
      {10, "net-profit peak", criterion_peak},
      {11, "determinism", criterion_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
