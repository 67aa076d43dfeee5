#include "iovfl/contracts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace iovfl::contract {

double VspProfile::budget(int j) const { return types.at(static_cast<std::size_t>(j)) / types.back() * budget_max; }

void VspProfile::validate() const {
  if (types.empty()) throw std::invalid_argument("profile: no types");
  if (distribution.size() != types.size()) throw std::invalid_argument("profile: distribution size != J");
  for (std::size_t j = 0; j < types.size(); ++j) {
    if (!(types[j] > 0.0)) throw std::invalid_argument("profile: types must be positive");
    if (j > 0 && !(types[j] > types[j - 1])) throw std::invalid_argument("profile: types must increase strictly");
    if (distribution[j] < 0.0) throw std::invalid_argument("profile: negative type probability");
  }
  const double total = std::accumulate(distribution.begin(), distribution.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("profile: distribution must sum to 1");
  if (budget_max < 0.0) throw std::invalid_argument("profile: negative budget");
  if (lambda < 0.0) throw std::invalid_argument("profile: negative lambda");
  if (true_type >= num_types()) throw std::invalid_argument("profile: true_type out of range");
}

VspProfile VspProfile::linear(int num_types, double budget_max, double lambda) {
  if (num_types < 1) throw std::invalid_argument("profile: need at least one type");
  VspProfile p;
  for (int j = 1; j <= num_types; ++j) p.types.push_back(j);
  p.distribution.assign(static_cast<std::size_t>(num_types), 1.0 / num_types);
  p.budget_max = budget_max;
  p.lambda = lambda;
  return p;
}

void ContractGrid::validate() const {
  if (levels_per_dim < 1) throw std::invalid_argument("grid: levels_per_dim must be >= 1");
  if (!(gamma >= 0.0)) throw std::invalid_argument("grid: gamma must be >= 0");
  if (max_iters < 1) throw std::invalid_argument("grid: max_iters must be >= 1");
  if (!(price_headroom > 0.0)) throw std::invalid_argument("grid: price_headroom must be positive");
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> row_of(const Eigen::MatrixXd& m, int j) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index n = 0; n < m.cols(); ++n) out[static_cast<std::size_t>(n)] = m(j, n);
  return out;
}

void check_shapes(std::span<const ContractMenu> menus, int num_types) {
  for (const auto& m : menus)
    if (static_cast<int>(m.zeta.size()) != num_types || static_cast<int>(m.phi.size()) != num_types)
      throw std::invalid_argument("menu of SV " + std::to_string(m.sv_id) + " does not have J entries");
}

}  // namespace

double satisfaction(std::span<const double> rho_row, std::span<const double> zeta_row, double lambda) {
  return lambda * std::sqrt(std::max(0.0, dot(rho_row, zeta_row)));
}

double cost(std::span<const double> rho_row, std::span<const double> phi_row) { return dot(rho_row, phi_row); }

double vsp_profit(int j, std::span<const double> rho_row, std::span<const double> zeta_row,
                  std::span<const double> phi_row, const VspProfile& profile) {
  return profile.types.at(static_cast<std::size_t>(j)) * satisfaction(rho_row, zeta_row, profile.lambda) -
         cost(rho_row, phi_row);
}

std::vector<double> solve_row(double a, std::span<const double> zeta, std::span<const double> phi, double budget) {
  const std::size_t n_sv = zeta.size();
  std::vector<double> r(n_sv, 0.0);
  if (budget <= 0.0 || a <= 0.0) return r;

  double x = 0.0;
  std::vector<std::size_t> paid;
  for (std::size_t n = 0; n < n_sv; ++n) {
    if (!(zeta[n] > 0.0)) continue;
    if (phi[n] <= 0.0) {
      r[n] = 1.0;
      x += zeta[n];
    } else {
      paid.push_back(n);
    }
  }
  std::stable_sort(paid.begin(), paid.end(), [&](std::size_t i, std::size_t k) {
    return phi[i] / zeta[i] < phi[k] / zeta[k];
  });

  double spent = 0.0;
  for (const std::size_t n : paid) {
    const double ratio = phi[n] / zeta[n];
    // Marginal satisfaction a / (2 sqrt x) must beat the price per unit.
    if (x > 0.0 && a / (2.0 * std::sqrt(x)) <= ratio) break;
    const double x_star = (a / (2.0 * ratio)) * (a / (2.0 * ratio));
    const double take = std::min({zeta[n], x_star - x, (budget - spent) / ratio});
    if (!(take > 0.0)) break;
    r[n] = take / zeta[n];
    x += take;
    spent += take * ratio;
    if (r[n] < 1.0) break;
  }
  return r;
}

double kkt_residual(double a, std::span<const double> zeta, std::span<const double> phi, double budget,
                    std::span<const double> rho) {
  const double x = dot(rho, zeta);
  const double spent = dot(rho, phi);
  if (!(x > 0.0)) {
    // Zero is optimal iff nothing can be bought: no budget, no benefit or no significance.
    const bool any_zeta = std::any_of(zeta.begin(), zeta.end(), [](double z) { return z > 0.0; });
    return (budget <= 0.0 || a <= 0.0 || !any_zeta) ? 0.0 : std::numeric_limits<double>::infinity();
  }
  std::vector<double> grad(zeta.size());
  for (std::size_t n = 0; n < zeta.size(); ++n) grad[n] = a * zeta[n] / (2.0 * std::sqrt(x)) - phi[n];

  // Candidate budget multipliers: none, or one implied by any paid vehicle.
  std::vector<double> mus{0.0};
  if (spent >= budget - 1e-12)
    for (std::size_t n = 0; n < zeta.size(); ++n)
      if (phi[n] > 0.0) mus.push_back(std::max(0.0, grad[n] / phi[n]));

  double best = std::numeric_limits<double>::infinity();
  for (const double mu : mus) {
    double res = mu * std::max(0.0, budget - spent);
    for (std::size_t n = 0; n < zeta.size(); ++n) {
      const double moved = std::clamp(rho[n] + grad[n] - mu * phi[n], 0.0, 1.0);
      res = std::max(res, std::abs(moved - rho[n]));
    }
    best = std::min(best, res);
  }
  return best;
}

Eigen::MatrixXd zeta_matrix(std::span<const ContractMenu> menus, int num_types) {
  check_shapes(menus, num_types);
  Eigen::MatrixXd z(num_types, static_cast<Eigen::Index>(menus.size()));
  for (std::size_t n = 0; n < menus.size(); ++n)
    for (int j = 0; j < num_types; ++j) z(j, static_cast<Eigen::Index>(n)) = menus[n].zeta[static_cast<std::size_t>(j)];
  return z;
}

Eigen::MatrixXd phi_matrix(std::span<const ContractMenu> menus, int num_types) {
  check_shapes(menus, num_types);
  Eigen::MatrixXd p(num_types, static_cast<Eigen::Index>(menus.size()));
  for (std::size_t n = 0; n < menus.size(); ++n)
    for (int j = 0; j < num_types; ++j) p(j, static_cast<Eigen::Index>(n)) = menus[n].phi[static_cast<std::size_t>(j)];
  return p;
}

PaymentProportions solve_payment_proportions(std::span<const ContractMenu> menus, const VspProfile& profile) {
  const int J = profile.num_types();
  const Eigen::MatrixXd z = zeta_matrix(menus, J), p = phi_matrix(menus, J);
  PaymentProportions out;
  out.rho = Eigen::MatrixXd::Zero(J, static_cast<Eigen::Index>(menus.size()));
  out.zero_rows.assign(static_cast<std::size_t>(J), false);
  for (int j = 0; j < J; ++j) {
    const auto zr = row_of(z, j), pr = row_of(p, j);
    const auto r = solve_row(profile.types[static_cast<std::size_t>(j)] * profile.lambda, zr, pr, profile.budget(j));
    bool all_zero = true;
    for (std::size_t n = 0; n < r.size(); ++n) {
      out.rho(j, static_cast<Eigen::Index>(n)) = r[n];
      all_zero = all_zero && r[n] == 0.0;
    }
    out.zero_rows[static_cast<std::size_t>(j)] = all_zero;
  }
  return out;
}

double vsp_profit_using_row(int j, int k, std::span<const ContractMenu> menus, const PaymentProportions& props,
                            const VspProfile& profile) {
  const int J = profile.num_types();
  const auto r = row_of(props.rho, k);
  return vsp_profit(j, r, row_of(zeta_matrix(menus, J), k), row_of(phi_matrix(menus, J), k), profile);
}

double actual_sv_profit(int n, int j, std::span<const ContractMenu> menus, const PaymentProportions& props,
                        const SvCost& costs) {
  const auto& m = menus[static_cast<std::size_t>(n)];
  const auto jj = static_cast<std::size_t>(j);
  return props.rho(j, n) * (m.phi[jj] - costs.xi * m.zeta[jj]);
}

double expected_sv_profit(int n, std::span<const ContractMenu> menus, const PaymentProportions& props,
                          const VspProfile& profile, const SvCost& costs) {
  double total = 0.0;
  for (int j = 0; j < profile.num_types(); ++j)
    total += profile.distribution[static_cast<std::size_t>(j)] * actual_sv_profit(n, j, menus, props, costs);
  return total;
}

double social_welfare(int j, std::span<const ContractMenu> menus, const PaymentProportions& props,
                      const SvCost& costs, const VspProfile& profile) {
  const auto r = row_of(props.rho, j);
  const auto z = row_of(zeta_matrix(menus, profile.num_types()), j);
  return profile.types.at(static_cast<std::size_t>(j)) * satisfaction(r, z, profile.lambda) - costs.xi * dot(r, z);
}

IcReport verify_ir_ic(std::span<const ContractMenu> menus, const PaymentProportions& props,
                      const VspProfile& profile, double tol) {
  const int J = profile.num_types();
  const Eigen::MatrixXd z = zeta_matrix(menus, J), p = phi_matrix(menus, J);
  std::vector<double> s(static_cast<std::size_t>(J)), c(static_cast<std::size_t>(J));
  for (int k = 0; k < J; ++k) {
    const auto r = row_of(props.rho, k);
    s[static_cast<std::size_t>(k)] = satisfaction(r, row_of(z, k), profile.lambda);
    c[static_cast<std::size_t>(k)] = cost(r, row_of(p, k));
  }
  IcReport rep;
  rep.min_ir = std::numeric_limits<double>::infinity();
  rep.min_ic = std::numeric_limits<double>::infinity();
  rep.ic.assign(static_cast<std::size_t>(J), std::vector<double>(static_cast<std::size_t>(J), 0.0));
  for (int j = 0; j < J; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const double th = profile.types[jj];
    const double own = th * s[jj] - c[jj];
    rep.ir.push_back(own);
    rep.min_ir = std::min(rep.min_ir, own);
    for (int k = 0; k < J; ++k) {
      if (k == j) continue;
      const auto kk = static_cast<std::size_t>(k);
      rep.ic[jj][kk] = own - (th * s[kk] - c[kk]);
      rep.min_ic = std::min(rep.min_ic, rep.ic[jj][kk]);
    }
  }
  rep.pass = rep.min_ir >= -tol && rep.min_ic >= -tol;
  return rep;
}

MonotonicityReport check_monotonicity(std::span<const ContractMenu> menus, const PaymentProportions& props,
                                      const VspProfile& profile, double tol) {
  const int J = profile.num_types();
  check_shapes(menus, J);
  MonotonicityReport rep;
  auto note = [&](bool& flag, double gap, const std::string& what) {
    if (gap < -tol) {
      flag = false;
      rep.worst_gap = std::min(rep.worst_gap, gap);
      rep.violations.push_back(what);
    }
  };
  for (const auto& m : menus)
    for (int j = 1; j < J; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const std::string where = "SV " + std::to_string(m.sv_id) + " type " + std::to_string(j + 1);
      note(rep.zeta_ok, m.zeta[jj] - m.zeta[jj - 1], "zeta decreases at " + where);
      note(rep.phi_ok, m.phi[jj] - m.phi[jj - 1], "phi decreases at " + where);
    }
  const auto ir = verify_ir_ic(menus, props, profile, tol).ir;
  for (int j = 1; j < J; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    note(rep.profit_ok, ir[jj] - ir[jj - 1], "VSP profit decreases at type " + std::to_string(j + 1));
  }
  return rep;
}

FeasibilityCheck check_reduced(int n, std::span<const ContractMenu> menus, const PaymentProportions& props,
                               const VspProfile& profile, double tol) {
  const int J = profile.num_types();
  const Eigen::MatrixXd z = zeta_matrix(menus, J), p = phi_matrix(menus, J);
  std::vector<double> s(static_cast<std::size_t>(J)), c(static_cast<std::size_t>(J));
  for (int k = 0; k < J; ++k) {
    const auto r = row_of(props.rho, k);
    s[static_cast<std::size_t>(k)] = satisfaction(r, row_of(z, k), profile.lambda);
    c[static_cast<std::size_t>(k)] = cost(r, row_of(p, k));
  }
  FeasibilityCheck out;
  auto eval = [&](bool ok) {
    ++out.evaluations;
    out.feasible = out.feasible && ok;
  };
  const auto& m = menus[static_cast<std::size_t>(n)];
  for (int j = 0; j < J; ++j) eval(c[static_cast<std::size_t>(j)] <= profile.budget(j) + tol);
  eval(profile.types[0] * s[0] - c[0] >= -tol);
  for (int j = 1; j < J; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const double th = profile.types[jj];
    eval(th * s[jj] - c[jj] >= th * s[jj - 1] - c[jj - 1] - tol);
  }
  for (int j = 1; j < J; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    eval(m.zeta[jj] >= m.zeta[jj - 1] - tol && m.phi[jj] >= m.phi[jj - 1] - tol);
  }
  return out;
}

FeasibilityCheck check_full(std::span<const ContractMenu> menus, const PaymentProportions& props,
                            const VspProfile& profile, double tol) {
  const int J = profile.num_types();
  const auto rep = verify_ir_ic(menus, props, profile, tol);
  const Eigen::MatrixXd p = phi_matrix(menus, J);
  FeasibilityCheck out;
  auto eval = [&](bool ok) {
    ++out.evaluations;
    out.feasible = out.feasible && ok;
  };
  for (int j = 0; j < J; ++j) eval(cost(row_of(props.rho, j), row_of(p, j)) <= profile.budget(j) + tol);
  for (int j = 0; j < J; ++j) eval(rep.ir[static_cast<std::size_t>(j)] >= -tol);
  for (int j = 0; j < J; ++j)
    for (int k = 0; k < J; ++k)
      if (k != j) eval(rep.ic[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] >= -tol);
  return out;
}

std::vector<ContractMenu> initial_menus(std::span<const int> sv_ids, std::span<const double> zeta_collected,
                                        const VspProfile& profile, const SvCost& costs) {
  if (sv_ids.size() != zeta_collected.size()) throw std::invalid_argument("initial_menus: size mismatch");
  std::vector<ContractMenu> out;
  for (std::size_t n = 0; n < sv_ids.size(); ++n) {
    ContractMenu m;
    m.sv_id = sv_ids[n];
    m.zeta_collected = zeta_collected[n];
    for (const double th : profile.types) {
      const double z = th / profile.types.back() * zeta_collected[n];
      m.zeta.push_back(z);
      m.phi.push_back(costs.price_unit * z);
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace iovfl::contract
