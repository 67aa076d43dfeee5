#pragma once

// Contract game between the vehicles (each offering a menu of
// (significance, price) pairs, one per VSP type) and the VSP, which picks
// payment proportions. Type rows are indexed 0..J-1 throughout the API; CSV
// output uses 1-based type numbers.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace iovfl::contract {

struct VspProfile {
  std::vector<double> types;         // theta, strictly increasing, positive
  std::vector<double> distribution;  // rho, sums to 1
  double budget_max = 125.0;
  double lambda = 12.0;  // per unit of significance
  int true_type = -1;    // row index; -1 means the highest type

  int num_types() const { return static_cast<int>(types.size()); }
  int true_row() const { return true_type < 0 ? num_types() - 1 : true_type; }
  /// B_j = theta_j / theta_J * B_max.
  double budget(int j) const;
  void validate() const;

  /// theta_j = j (1-based), uniform distribution.
  static VspProfile linear(int num_types, double budget_max, double lambda);
};

struct ContractMenu {
  int sv_id = 0;
  double zeta_collected = 0.0;  // the vehicle's realised significance, upper bound of zeta
  std::vector<double> zeta;     // per type
  std::vector<double> phi;      // per type
};

struct SvCost {
  double xi = 5.0;           // training cost per unit significance
  double price_unit = 21.0;  // initial price per unit significance
};

struct PaymentProportions {
  Eigen::MatrixXd rho;      // J x N, entries in [0,1]
  std::vector<bool> zero_rows;  // rows where the best response is paying nothing
};

struct ContractGrid {
  int levels_per_dim = 21;
  double gamma = 1e-6;
  int max_iters = 200;
  double price_headroom = 2.0;  // phi cap = headroom * price_unit * zeta_collected
  // When true each candidate row is scored with the VSP's proportions
  // re-optimised for that row; false keeps the proportions fixed.
  bool anticipate_proportions = true;

  void validate() const;
};

inline constexpr double kFeasTol = 1e-9;

// ---- VSP side -------------------------------------------------------------

double satisfaction(std::span<const double> rho_row, std::span<const double> zeta_row, double lambda);
double cost(std::span<const double> rho_row, std::span<const double> phi_row);
double vsp_profit(int j, std::span<const double> rho_row, std::span<const double> zeta_row,
                  std::span<const double> phi_row, const VspProfile& profile);

/// Exact maximiser of a*sqrt(sum r*zeta) - sum r*phi subject to
/// sum r*phi <= budget and 0 <= r <= 1. Vehicles are filled in ascending
/// phi/zeta order (ties to the lower index) up to the stationary point or the
/// budget, whichever binds first.
std::vector<double> solve_row(double a, std::span<const double> zeta, std::span<const double> phi,
                              double budget);

/// Projected-gradient KKT residual of a row solution (0 at an optimum).
double kkt_residual(double a, std::span<const double> zeta, std::span<const double> phi, double budget,
                    std::span<const double> rho);

/// Menu matrices: Z(j, n) and P(j, n).
Eigen::MatrixXd zeta_matrix(std::span<const ContractMenu> menus, int num_types);
Eigen::MatrixXd phi_matrix(std::span<const ContractMenu> menus, int num_types);

PaymentProportions solve_payment_proportions(std::span<const ContractMenu> menus, const VspProfile& profile);

/// VSP profit of type j when it takes row k of the menus.
double vsp_profit_using_row(int j, int k, std::span<const ContractMenu> menus, const PaymentProportions& props,
                            const VspProfile& profile);

// ---- vehicle side ---------------------------------------------------------

/// rho_j^n (phi_j^n - xi zeta_j^n) for a single realised type.
double actual_sv_profit(int n, int j, std::span<const ContractMenu> menus, const PaymentProportions& props,
                        const SvCost& costs);

/// sum_j rho_j * actual_sv_profit(n, j).
double expected_sv_profit(int n, std::span<const ContractMenu> menus, const PaymentProportions& props,
                          const VspProfile& profile, const SvCost& costs);

double social_welfare(int j, std::span<const ContractMenu> menus, const PaymentProportions& props,
                      const SvCost& costs, const VspProfile& profile);

// ---- constraint checks ------------------------------------------------------

struct IcReport {
  std::vector<double> ir;                    // theta_j S_j - C_j
  std::vector<std::vector<double>> ic;       // ic[j][k]: margin of row j over row k for type j
  double min_ir = 0.0;
  double min_ic = 0.0;  // over k != j; +inf when J = 1
  bool pass = true;
};

IcReport verify_ir_ic(std::span<const ContractMenu> menus, const PaymentProportions& props,
                      const VspProfile& profile, double tol = kFeasTol);

struct MonotonicityReport {
  bool zeta_ok = true;
  bool phi_ok = true;
  bool profit_ok = true;
  double worst_gap = 0.0;  // most negative step found (0 when all pass)
  std::vector<std::string> violations;
  bool pass() const { return zeta_ok && phi_ok && profit_ok; }
};

MonotonicityReport check_monotonicity(std::span<const ContractMenu> menus, const PaymentProportions& props,
                                      const VspProfile& profile, double tol = kFeasTol);

struct FeasibilityCheck {
  bool feasible = true;
  int evaluations = 0;  // constraints evaluated (no short-circuit)
};

/// Reduced constraint set for vehicle n: J budget rows, type-1 IR, J-1 local
/// downward IC and J-1 monotonicity constraints (3J - 1 evaluations).
FeasibilityCheck check_reduced(int n, std::span<const ContractMenu> menus, const PaymentProportions& props,
                               const VspProfile& profile, double tol = kFeasTol);

/// Full constraint set: J budget rows, J IR and J(J-1) pairwise IC
/// (J^2 + J evaluations).
FeasibilityCheck check_full(std::span<const ContractMenu> menus, const PaymentProportions& props,
                            const VspProfile& profile, double tol = kFeasTol);

// ---- equilibrium search -----------------------------------------------------

/// zeta_j = theta_j / theta_J * zeta_collected, phi_j = price_unit * zeta_j.
std::vector<ContractMenu> initial_menus(std::span<const int> sv_ids, std::span<const double> zeta_collected,
                                        const VspProfile& profile, const SvCost& costs);

std::vector<double> zeta_levels(const ContractMenu& menu, const ContractGrid& grid);
std::vector<double> phi_levels(const ContractMenu& menu, const SvCost& costs, const ContractGrid& grid);

struct BestResponse {
  ContractMenu menu;        // incumbent when not improved
  double incumbent_profit = 0.0;
  double best_profit = 0.0;  // best feasible candidate (== incumbent_profit when none)
  bool incumbent_feasible = true;
  bool improved = false;      // menu differs from the incumbent
  bool no_feasible = false;   // no feasible candidate on the grid
};

/// Best menu of vehicle n against the others' current menus, over the
/// monotone grid menus that satisfy the reduced constraints.
BestResponse best_response(int n, std::span<const ContractMenu> menus, const PaymentProportions& props,
                           const VspProfile& profile, const SvCost& costs, const ContractGrid& grid);

struct UpdateTrace {
  int iteration = 0;
  int sv_id = 0;
  double profit_before = 0.0;
  double profit_after = 0.0;
  bool incumbent_feasible = true;
  ContractMenu menu;                // after the update
  std::vector<double> vsp_profits;  // per row, after the update
};

struct EquilibriumResult {
  std::vector<ContractMenu> menus;
  PaymentProportions proportions;
  int iterations = 0;
  bool converged = false;
  bool any_infeasible = false;  // some vehicle had no feasible menu at the end
  int cycle_length = 0;         // sweeps in a detected best-response cycle (0 when none)
  std::vector<UpdateTrace> trace;
};

/// Gauss-Seidel best-response sweeps in ascending sv_id until no vehicle
/// moves. Stops early, unconverged, when the end-of-sweep profile repeats.
EquilibriumResult iterate_to_equilibrium(std::vector<ContractMenu> menus, const VspProfile& profile,
                                         const SvCost& costs, const ContractGrid& grid);

/// Largest profit gain any vehicle can get by a unilateral feasible grid deviation.
double max_unilateral_gain(std::span<const ContractMenu> menus, const VspProfile& profile, const SvCost& costs,
                           const ContractGrid& grid);

struct OracleProfile {
  std::vector<ContractMenu> menus;
  std::vector<double> profits;
};

/// Every feasible profile of grid menus where no vehicle gains more than
/// gamma by a unilateral move. Limited to N <= 2, J <= 2, levels <= 5.
std::vector<OracleProfile> brute_force_equilibrium(std::span<const ContractMenu> base, const VspProfile& profile,
                                                   const SvCost& costs, const ContractGrid& grid);

/// Columns: round,iteration,sv_id,type_index,zeta,phi,sv_profit,vsp_profit.
void write_contract_trace(std::ostream& out, int round, const EquilibriumResult& result,
                          const VspProfile& profile, const SvCost& costs, bool header = true);

}  // namespace iovfl::contract
