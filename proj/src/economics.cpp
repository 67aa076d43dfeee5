#include "iovfl/economics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace iovfl::econ {

void FreshnessParams::validate() const {
  if (!(a > 0.0)) throw std::invalid_argument("freshness: a must be positive");
  if (!(b >= 0.0)) throw std::invalid_argument("freshness: b must be non-negative");
}

double model_value(double chi, double t, const FreshnessParams& params) {
  params.validate();
  if (!(chi >= 0.0 && chi <= 1.0)) throw std::invalid_argument("model_value: accuracy outside [0,1]");
  if (!(t >= 0.0)) throw std::invalid_argument("model_value: negative round");
  return params.a * chi * std::exp(-params.b * t);
}

namespace {

struct RowSums {
  double x = 0.0;  // sum rho * zeta
  double c = 0.0;  // sum rho * phi
};

RowSums row_sums(int j, std::span<const contract::ContractMenu> menus, const contract::PaymentProportions& props) {
  RowSums s;
  const auto jj = static_cast<std::size_t>(j);
  for (std::size_t n = 0; n < menus.size(); ++n) {
    const double r = props.rho(j, static_cast<Eigen::Index>(n));
    s.x += r * menus[n].zeta.at(jj);
    s.c += r * menus[n].phi.at(jj);
  }
  return s;
}

}  // namespace

double net_vsp_profit(int j, std::span<const contract::ContractMenu> menus,
                      const contract::PaymentProportions& props, const contract::VspProfile& profile, double omega) {
  const auto s = row_sums(j, menus, props);
  return profile.types.at(static_cast<std::size_t>(j)) * omega * (profile.lambda * std::sqrt(std::max(0.0, s.x))) - s.c;
}

double net_social_welfare(int j, std::span<const contract::ContractMenu> menus,
                          const contract::PaymentProportions& props, const contract::VspProfile& profile,
                          const contract::SvCost& costs, double omega) {
  const auto s = row_sums(j, menus, props);
  return profile.types.at(static_cast<std::size_t>(j)) * omega * (profile.lambda * std::sqrt(std::max(0.0, s.x))) -
         costs.xi * s.x;
}

}  // namespace iovfl::econ
