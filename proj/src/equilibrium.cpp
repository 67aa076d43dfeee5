// Best responses of a single vehicle and the sweep that iterates them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "iovfl/contracts.hpp"

namespace iovfl::contract {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> row_of(const Eigen::MatrixXd& m, int j) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index n = 0; n < m.cols(); ++n) out[static_cast<std::size_t>(n)] = m(j, n);
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> levels(double upper, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = upper;
    return out;
  }
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = upper * i / (count - 1);
  return out;
}

// Row-wise evaluation of every grid point (a, b) for one vehicle.
struct RowTable {
  std::vector<double> s, c, f;
  std::vector<char> ok;
};

RowTable evaluate_row(int j, int n, const Eigen::MatrixXd& z, const Eigen::MatrixXd& p,
                      const PaymentProportions& props, const VspProfile& profile, const SvCost& costs,
                      const ContractGrid& grid, const std::vector<double>& zg, const std::vector<double>& pg) {
  const auto L = zg.size();
  const auto jj = static_cast<std::size_t>(j);
  const auto nn = static_cast<std::size_t>(n);
  const double theta = profile.types[jj];
  const double budget = profile.budget(j);
  auto zrow = row_of(z, j), prow = row_of(p, j);
  const auto fixed = row_of(props.rho, j);

  RowTable t;
  t.s.resize(L * L);
  t.c.resize(L * L);
  t.f.resize(L * L);
  t.ok.resize(L * L);
  for (std::size_t a = 0; a < L; ++a)
    for (std::size_t b = 0; b < L; ++b) {
      const std::size_t st = a * L + b;
      zrow[nn] = zg[a];
      prow[nn] = pg[b];
      const auto r = grid.anticipate_proportions ? solve_row(theta * profile.lambda, zrow, prow, budget) : fixed;
      t.s[st] = profile.lambda * std::sqrt(std::max(0.0, dot(r, zrow)));
      t.c[st] = dot(r, prow);
      bool ok = t.c[st] <= budget + kFeasTol;
      if (j == 0) ok = ok && theta * t.s[st] - t.c[st] >= -kFeasTol;
      t.ok[st] = ok;
      t.f[st] = profile.distribution[jj] * (r[nn] * (pg[b] - costs.xi * zg[a]));
    }
  return t;
}

// 2-D prefix maximum over grid indices, ties to the smaller state index.
class PrefixMax2D {
 public:
  explicit PrefixMax2D(std::size_t side) : side_(side), val_(side * side, kNegInf), idx_(side * side, -1) {}

  void insert(std::size_t a, std::size_t b, double v, int index) {
    for (std::size_t i = a + 1; i <= side_; i += i & (~i + 1))
      for (std::size_t k = b + 1; k <= side_; k += k & (~k + 1)) {
        const std::size_t cell = (i - 1) * side_ + (k - 1);
        if (better(v, index, val_[cell], idx_[cell])) {
          val_[cell] = v;
          idx_[cell] = index;
        }
      }
  }

  // Best over all inserted (a', b') with a' <= a and b' <= b.
  std::pair<double, int> query(std::size_t a, std::size_t b) const {
    double v = kNegInf;
    int index = -1;
    for (std::size_t i = a + 1; i > 0; i -= i & (~i + 1))
      for (std::size_t k = b + 1; k > 0; k -= k & (~k + 1)) {
        const std::size_t cell = (i - 1) * side_ + (k - 1);
        if (better(val_[cell], idx_[cell], v, index)) {
          v = val_[cell];
          index = idx_[cell];
        }
      }
    return {v, index};
  }

 private:
  static bool better(double v, int i, double w, int k) {
    if (i < 0) return false;
    if (k < 0) return true;
    return v > w || (v == w && i < k);
  }
  std::size_t side_;
  std::vector<double> val_;
  std::vector<int> idx_;
};

bool same_menu(const ContractMenu& x, const ContractMenu& y) { return x.zeta == y.zeta && x.phi == y.phi; }

PaymentProportions current_proportions(std::span<const ContractMenu> menus, const PaymentProportions& sweep_props,
                                       const VspProfile& profile, const ContractGrid& grid) {
  return grid.anticipate_proportions ? solve_payment_proportions(menus, profile) : sweep_props;
}

}  // namespace

std::vector<double> zeta_levels(const ContractMenu& menu, const ContractGrid& grid) {
  return levels(menu.zeta_collected, grid.levels_per_dim);
}

std::vector<double> phi_levels(const ContractMenu& menu, const SvCost& costs, const ContractGrid& grid) {
  return levels(grid.price_headroom * costs.price_unit * menu.zeta_collected, grid.levels_per_dim);
}

BestResponse best_response(int n, std::span<const ContractMenu> menus, const PaymentProportions& props,
                           const VspProfile& profile, const SvCost& costs, const ContractGrid& grid) {
  grid.validate();
  const int J = profile.num_types();
  if (n < 0 || static_cast<std::size_t>(n) >= menus.size()) throw std::out_of_range("best_response: bad SV index");
  const auto& incumbent = menus[static_cast<std::size_t>(n)];

  BestResponse out;
  out.menu = incumbent;
  out.incumbent_profit = expected_sv_profit(n, menus, props, profile, costs);
  out.incumbent_feasible = check_reduced(n, menus, props, profile).feasible;
  out.best_profit = out.incumbent_profit;

  const auto zg = zeta_levels(incumbent, grid);
  const auto pg = phi_levels(incumbent, costs, grid);
  const std::size_t L = zg.size();
  const std::size_t states = L * L;
  const Eigen::MatrixXd z = zeta_matrix(menus, J), p = phi_matrix(menus, J);

  // Exact dynamic programme over rows: state = (zeta level, phi level) of
  // row j; a transition from row j-1 needs both levels non-decreasing and the
  // local downward incentive constraint of type j.
  std::vector<std::vector<int>> back(static_cast<std::size_t>(J), std::vector<int>(states, -1));
  RowTable prev = evaluate_row(0, n, z, p, props, profile, costs, grid, zg, pg);
  std::vector<double> best(states, kNegInf);
  for (std::size_t st = 0; st < states; ++st)
    if (prev.ok[st]) best[st] = prev.f[st];

  for (int j = 1; j < J; ++j) {
    const RowTable cur = evaluate_row(j, n, z, p, props, profile, costs, grid, zg, pg);
    const double theta = profile.types[static_cast<std::size_t>(j)];
    std::vector<double> key(states), lhs(states);
    std::vector<int> from, to;
    for (std::size_t st = 0; st < states; ++st) {
      key[st] = theta * prev.s[st] - prev.c[st] - kFeasTol;
      lhs[st] = theta * cur.s[st] - cur.c[st];
      if (best[st] > kNegInf) from.push_back(static_cast<int>(st));
      if (cur.ok[st]) to.push_back(static_cast<int>(st));
    }
    std::stable_sort(from.begin(), from.end(), [&](int x, int y) { return key[x] < key[y]; });
    std::stable_sort(to.begin(), to.end(), [&](int x, int y) { return lhs[x] < lhs[y]; });

    PrefixMax2D tree(L);
    std::vector<double> next(states, kNegInf);
    auto& bk = back[static_cast<std::size_t>(j)];
    std::size_t fi = 0;
    for (const int st : to) {
      while (fi < from.size() && lhs[st] >= key[from[fi]]) {
        const auto sp = static_cast<std::size_t>(from[fi]);
        tree.insert(sp / L, sp % L, best[sp], from[fi]);
        ++fi;
      }
      const auto s = static_cast<std::size_t>(st);
      const auto [v, idx] = tree.query(s / L, s % L);
      if (idx >= 0) {
        next[s] = v + cur.f[s];
        bk[s] = idx;
      }
    }
    best = std::move(next);
    prev = cur;
  }

  int arg = -1;
  for (std::size_t st = 0; st < states; ++st)
    if (best[st] > kNegInf && (arg < 0 || best[st] > best[static_cast<std::size_t>(arg)])) arg = static_cast<int>(st);
  if (arg < 0) {
    out.no_feasible = true;
    return out;
  }

  ContractMenu cand = incumbent;
  int st = arg;
  for (int j = J - 1; j >= 0; --j) {
    const auto s = static_cast<std::size_t>(st);
    cand.zeta[static_cast<std::size_t>(j)] = zg[s / L];
    cand.phi[static_cast<std::size_t>(j)] = pg[s % L];
    st = back[static_cast<std::size_t>(j)][s];
  }
  out.best_profit = best[static_cast<std::size_t>(arg)];

  const bool accept = !out.incumbent_feasible || out.best_profit > out.incumbent_profit + grid.gamma;
  if (accept && !same_menu(cand, incumbent)) {
    out.menu = std::move(cand);
    out.improved = true;
  }
  return out;
}

EquilibriumResult iterate_to_equilibrium(std::vector<ContractMenu> menus, const VspProfile& profile,
                                         const SvCost& costs, const ContractGrid& grid) {
  profile.validate();
  grid.validate();
  EquilibriumResult res;
  std::vector<int> order(menus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return menus[static_cast<std::size_t>(x)].sv_id < menus[static_cast<std::size_t>(y)].sv_id; });

  std::vector<std::vector<ContractMenu>> seen;  // profile at the end of each sweep
  for (int it = 1; it <= grid.max_iters; ++it) {
    res.iterations = it;
    const PaymentProportions sweep_props = solve_payment_proportions(menus, profile);
    bool changed = false;
    for (const int n : order) {
      const auto props = current_proportions(menus, sweep_props, profile, grid);
      const BestResponse br = best_response(n, menus, props, profile, costs, grid);
      if (!br.improved) continue;
      changed = true;
      menus[static_cast<std::size_t>(n)] = br.menu;
      const auto after = current_proportions(menus, sweep_props, profile, grid);
      UpdateTrace tr;
      tr.iteration = it;
      tr.sv_id = br.menu.sv_id;
      tr.profit_before = br.incumbent_profit;
      tr.profit_after = expected_sv_profit(n, menus, after, profile, costs);
      tr.incumbent_feasible = br.incumbent_feasible;
      tr.menu = br.menu;
      for (int j = 0; j < profile.num_types(); ++j)
        tr.vsp_profits.push_back(vsp_profit_using_row(j, j, menus, after, profile));
      res.trace.push_back(std::move(tr));
    }
    if (!changed) {
      res.converged = true;
      break;
    }
    for (std::size_t s = 0; s < seen.size() && !res.cycle_length; ++s)
      if (std::equal(menus.begin(), menus.end(), seen[s].begin(), same_menu))
        res.cycle_length = static_cast<int>(seen.size() - s);
    if (res.cycle_length) break;
    seen.push_back(menus);
  }
  res.proportions = solve_payment_proportions(menus, profile);
  for (std::size_t n = 0; n < menus.size(); ++n)
    if (!check_reduced(static_cast<int>(n), menus, res.proportions, profile).feasible) res.any_infeasible = true;
  res.menus = std::move(menus);
  return res;
}

double max_unilateral_gain(std::span<const ContractMenu> menus, const VspProfile& profile, const SvCost& costs,
                           const ContractGrid& grid) {
  const auto props = solve_payment_proportions(menus, profile);
  double gain = 0.0;
  for (std::size_t n = 0; n < menus.size(); ++n) {
    const auto br = best_response(static_cast<int>(n), menus, props, profile, costs, grid);
    if (!br.no_feasible) gain = std::max(gain, br.best_profit - br.incumbent_profit);
  }
  return gain;
}

std::vector<OracleProfile> brute_force_equilibrium(std::span<const ContractMenu> base, const VspProfile& profile,
                                                   const SvCost& costs, const ContractGrid& grid) {
  profile.validate();
  grid.validate();
  const int J = profile.num_types();
  const std::size_t N = base.size();
  if (N < 1 || N > 2 || J > 2 || grid.levels_per_dim > 5)
    throw std::invalid_argument("brute_force_equilibrium: instance too large (need N <= 2, J <= 2, levels <= 5)");

  // All monotone grid menus of each vehicle.
  std::vector<std::vector<ContractMenu>> options(N);
  for (std::size_t n = 0; n < N; ++n) {
    const auto zg = zeta_levels(base[n], grid);
    const auto pg = phi_levels(base[n], costs, grid);
    const std::size_t L = zg.size();
    // Enumerate states row by row with both levels non-decreasing.
    std::vector<std::pair<std::size_t, std::size_t>> cur(static_cast<std::size_t>(J));
    auto rec = [&](auto&& self, int j) -> void {
      if (j == J) {
        ContractMenu m = base[n];
        for (int k = 0; k < J; ++k) {
          m.zeta[static_cast<std::size_t>(k)] = zg[cur[static_cast<std::size_t>(k)].first];
          m.phi[static_cast<std::size_t>(k)] = pg[cur[static_cast<std::size_t>(k)].second];
        }
        options[n].push_back(std::move(m));
        return;
      }
      const std::size_t a0 = j ? cur[static_cast<std::size_t>(j - 1)].first : 0;
      const std::size_t b0 = j ? cur[static_cast<std::size_t>(j - 1)].second : 0;
      for (std::size_t a = a0; a < L; ++a)
        for (std::size_t b = b0; b < L; ++b) {
          cur[static_cast<std::size_t>(j)] = {a, b};
          self(self, j + 1);
        }
    };
    rec(rec, 0);
  }

  const std::size_t n0 = options[0].size();
  const std::size_t n1 = N == 2 ? options[1].size() : 1;
  std::vector<char> feasible(n0 * n1);
  std::vector<std::vector<double>> profit(n0 * n1, std::vector<double>(N));
  std::vector<ContractMenu> menus(base.begin(), base.end());
  for (std::size_t i0 = 0; i0 < n0; ++i0)
    for (std::size_t i1 = 0; i1 < n1; ++i1) {
      menus[0] = options[0][i0];
      if (N == 2) menus[1] = options[1][i1];
      const auto props = solve_payment_proportions(menus, profile);
      const std::size_t cell = i0 * n1 + i1;
      feasible[cell] = check_reduced(0, menus, props, profile).feasible;
      for (std::size_t n = 0; n < N; ++n)
        profit[cell][n] = expected_sv_profit(static_cast<int>(n), menus, props, profile, costs);
    }

  std::vector<OracleProfile> out;
  for (std::size_t i0 = 0; i0 < n0; ++i0)
    for (std::size_t i1 = 0; i1 < n1; ++i1) {
      const std::size_t cell = i0 * n1 + i1;
      if (!feasible[cell]) continue;
      bool stable = true;
      for (std::size_t d = 0; d < n0 && stable; ++d) {
        const std::size_t alt = d * n1 + i1;
        if (feasible[alt] && profit[alt][0] > profit[cell][0] + grid.gamma) stable = false;
      }
      for (std::size_t d = 0; N == 2 && d < n1 && stable; ++d) {
        const std::size_t alt = i0 * n1 + d;
        if (feasible[alt] && profit[alt][1] > profit[cell][1] + grid.gamma) stable = false;
      }
      if (!stable) continue;
      OracleProfile op;
      op.menus.push_back(options[0][i0]);
      if (N == 2) op.menus.push_back(options[1][i1]);
      op.profits = profit[cell];
      out.push_back(std::move(op));
    }
  return out;
}

void write_contract_trace(std::ostream& out, int round, const EquilibriumResult& result,
                          const VspProfile& profile, const SvCost& /*costs*/, bool header) {
  if (header) out << "round,iteration,sv_id,type_index,zeta,phi,sv_profit,vsp_profit\n";
  const auto old_precision = out.precision(17);
  for (const auto& tr : result.trace)
    for (int j = 0; j < profile.num_types(); ++j) {
      const auto jj = static_cast<std::size_t>(j);
      out << round << ',' << tr.iteration << ',' << tr.sv_id << ',' << j + 1 << ',' << tr.menu.zeta[jj] << ','
          << tr.menu.phi[jj] << ',' << tr.profit_after << ',' << tr.vsp_profits[jj] << '\n';
    }
  out.precision(old_precision);
}

}  // namespace iovfl::contract
