#pragma once

// Accuracy- and freshness-weighted value of the global model, and the net
// profit and welfare it induces.

#include <span>

#include "iovfl/contracts.hpp"

namespace iovfl::econ {

struct FreshnessParams {
  double a = 1.0;   // accuracy weight
  double b = 0.05;  // decay per round

  void validate() const;
};

/// omega = a * chi * exp(-b t).
double model_value(double chi, double t, const FreshnessParams& params);

/// theta_j * omega * S_j - C_j.
double net_vsp_profit(int j, std::span<const contract::ContractMenu> menus,
                      const contract::PaymentProportions& props, const contract::VspProfile& profile, double omega);

/// theta_j * omega * S_j - xi * sum(rho * zeta).
double net_social_welfare(int j, std::span<const contract::ContractMenu> menus,
                          const contract::PaymentProportions& props, const contract::VspProfile& profile,
                          const contract::SvCost& costs, double omega);

}  // namespace iovfl::econ
