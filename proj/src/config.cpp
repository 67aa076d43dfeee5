#include "iovfl/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "text_util.hpp"

namespace iovfl::sim {
namespace {

using detail::parse_number;
using detail::split_list;
using detail::trim;

[[noreturn]] void bad(std::string_view key, std::string_view value) {
  throw std::invalid_argument("config: bad value '" + std::string(value) + "' for " + std::string(key));
}

template <class T>
T number(std::string_view key, std::string_view value) {
  const auto v = parse_number<T>(value);
  if (!v) bad(key, value);
  return *v;
}

bool boolean(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad(key, value);
}

template <class T>
std::vector<T> list(std::string_view key, std::string_view value) {
  std::vector<T> out;
  for (const auto& piece : split_list(value)) out.push_back(number<T>(key, piece));
  return out;
}

Range range(std::string_view key, std::string_view value) {
  const auto v = list<double>(key, value);
  if (v.size() != 2 || !(v[0] >= 0.0) || !(v[0] <= v[1]) || !(v[1] <= 1.0)) bad(key, value);
  return {v[0], v[1]};
}

std::string fmt(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) out += fmt(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

SimConfig SimConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  SimConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      cfg.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void SimConfig::set(std::string_view key, std::string_view value) {
  const auto d = [&] { return number<double>(key, value); };
  const auto i = [&] { return number<int>(key, value); };

  if (key == "num_svs") num_svs = i();
  else if (key == "num_selected") num_selected = i();
  else if (key == "tier_high_fraction") tier_high_fraction = d();
  else if (key == "tier_low_fraction") tier_low_fraction = d();
  else if (key == "tier_weight_high") tier_weights.high = d();
  else if (key == "tier_weight_medium") tier_weights.medium = d();
  else if (key == "tier_weight_low") tier_weights.low = d();
  else if (key == "collect_high") collect_high = range(key, value);
  else if (key == "collect_medium") collect_medium = range(key, value);
  else if (key == "collect_low") collect_low = range(key, value);
  else if (key == "insignificant_collect_factor") insignificant_collect_factor = d();
  else if (key == "required_per_cell") required_per_cell = d();
  else if (key == "num_types") num_types = i();
  else if (key == "types") types = list<double>(key, value);
  else if (key == "distribution") distribution = list<double>(key, value);
  else if (key == "true_type") true_type = i();
  else if (key == "budget_max") budget_max = d();
  else if (key == "lambda") lambda = d();
  else if (key == "lambda_per_tenth") lambda = 10.0 * d();
  else if (key == "price_unit") price_unit = d();
  else if (key == "price_per_tenth") price_unit = 10.0 * d();
  else if (key == "xi") xi = d();
  else if (key == "xi_per_tenth") xi = 10.0 * d();
  else if (key == "grid_levels") grid.levels_per_dim = i();
  else if (key == "gamma") grid.gamma = d();
  else if (key == "max_contract_iters") grid.max_iters = i();
  else if (key == "price_headroom") grid.price_headroom = d();
  else if (key == "anticipate_proportions") grid.anticipate_proportions = boolean(key, value);
  else if (key == "rounds") rounds = i();
  else if (key == "tau_th") tau_th = i();
  else if (key == "batch_size") batch_size = i();
  else if (key == "hidden") hidden = list<int>(key, value);
  else if (key == "adam_kappa0") adam.kappa0 = d();
  else if (key == "adam_beta_p") adam.beta_p = d();
  else if (key == "adam_beta_q") adam.beta_q = d();
  else if (key == "adam_epsilon") adam.epsilon = d();
  else if (key == "test_fraction") test_fraction = d();
  else if (key == "noniid_pieces") noniid_pieces = i();
  else if (key == "partition") {
    if (value == "iid") partition = fl::PartitionMode::iid;
    else if (value == "noniid") partition = fl::PartitionMode::noniid;
    else bad(key, value);
  } else if (key == "early_stop") early_stop = boolean(key, value);
  else if (key == "stop_window") stop_window = i();
  else if (key == "stop_threshold") stop_threshold = d();
  else if (key == "freshness_a") freshness.a = d();
  else if (key == "freshness_b") freshness.b = d();
  else if (key == "data") {
    if (value == "synthetic") synthetic = true;
    else if (value == "files") synthetic = false;
    else bad(key, value);
  } else if (key == "synth.num_areas") synth.num_areas = i();
  else if (key == "synth.num_locations") synth.num_locations = i();
  else if (key == "synth.num_samples") synth.num_samples = i();
  else if (key == "synth.significant_fraction") synth.significant_fraction = d();
  else if (key == "synth.aadf_high_mean") synth.aadf_high_mean = d();
  else if (key == "synth.aadf_low_mean") synth.aadf_low_mean = d();
  else if (key == "synth.num_years") synth.num_years = i();
  else if (key == "synth.seed") synth.seed = number<std::uint64_t>(key, value);
  else if (key == "aadf_path") aadf_path = std::string(value);
  else if (key == "accident_path") accident_path = std::string(value);
  else if (key == "schema_path") schema_path = std::string(value);
  else if (key == "seed") seed = number<std::uint64_t>(key, value);
  else throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
}

void SimConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  require(num_svs >= 1, "num_svs must be >= 1");
  require(num_selected >= 1 && num_selected <= num_svs, "num_selected must lie in 1..num_svs");
  require(tier_high_fraction >= 0.0 && tier_low_fraction >= 0.0 && tier_high_fraction + tier_low_fraction <= 1.0,
          "tier fractions must be non-negative and sum to at most 1");
  require(tier_weights.high > 0.0 && tier_weights.medium > 0.0 && tier_weights.low > 0.0,
          "tier weights must be positive");
  require(insignificant_collect_factor >= 0.0 && insignificant_collect_factor <= 1.0,
          "insignificant_collect_factor must lie in [0,1]");
  require(required_per_cell > 0.0, "required_per_cell must be positive");
  require(num_types >= 1, "num_types must be >= 1");
  require(types.empty() || static_cast<int>(types.size()) == num_types, "types needs num_types entries");
  require(distribution.empty() || static_cast<int>(distribution.size()) == num_types,
          "distribution needs num_types entries");
  require(true_type >= 0 && true_type <= num_types, "true_type must lie in 1..num_types");
  require(budget_max >= 0.0 && lambda > 0.0 && price_unit > 0.0 && xi >= 0.0, "contract parameters must be positive");
  grid.validate();
  require(rounds >= 0, "rounds must be >= 0");
  require(tau_th >= 0, "tau_th must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  for (const int h : hidden) require(h >= 1, "hidden widths must be >= 1");
  adam.validate();
  require(noniid_pieces >= 1, "noniid_pieces must be >= 1");
  require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must lie in (0,1)");
  require(stop_window >= 1 && stop_threshold >= 0.0, "bad early-stop settings");
  freshness.validate();
  if (synthetic) synth.validate();
  else require(!aadf_path.empty() && !accident_path.empty(), "data = files needs aadf_path and accident_path");
  profile().validate();
}

contract::VspProfile SimConfig::profile() const {
  auto p = contract::VspProfile::linear(num_types, budget_max, lambda);
  if (!types.empty()) p.types = types;
  if (!distribution.empty()) p.distribution = distribution;
  p.true_type = true_type == 0 ? num_types - 1 : true_type - 1;
  return p;
}

Range SimConfig::collect_range(selection::Tier t) const {
  switch (t) {
    case selection::Tier::high: return collect_high;
    case selection::Tier::medium: return collect_medium;
    case selection::Tier::low: return collect_low;
  }
  return collect_medium;
}

std::vector<std::pair<std::string, std::string>> SimConfig::entries() const {
  auto rng = [](const Range& r) { return fmt(r.lo) + "," + fmt(r.hi); };
  return {
      {"num_svs", std::to_string(num_svs)},
      {"num_selected", std::to_string(num_selected)},
      {"tier_high_fraction", fmt(tier_high_fraction)},
      {"tier_low_fraction", fmt(tier_low_fraction)},
      {"tier_weight_high", fmt(tier_weights.high)},
      {"tier_weight_medium", fmt(tier_weights.medium)},
      {"tier_weight_low", fmt(tier_weights.low)},
      {"collect_high", rng(collect_high)},
      {"collect_medium", rng(collect_medium)},
      {"collect_low", rng(collect_low)},
      {"insignificant_collect_factor", fmt(insignificant_collect_factor)},
      {"required_per_cell", fmt(required_per_cell)},
      {"num_types", std::to_string(num_types)},
      {"types", join(profile().types)},
      {"distribution", join(profile().distribution)},
      {"true_type", std::to_string(profile().true_row() + 1)},
      {"budget_max", fmt(budget_max)},
      {"lambda", fmt(lambda)},
      {"price_unit", fmt(price_unit)},
      {"xi", fmt(xi)},
      {"grid_levels", std::to_string(grid.levels_per_dim)},
      {"gamma", fmt(grid.gamma)},
      {"max_contract_iters", std::to_string(grid.max_iters)},
      {"price_headroom", fmt(grid.price_headroom)},
      {"anticipate_proportions", grid.anticipate_proportions ? "true" : "false"},
      {"rounds", std::to_string(rounds)},
      {"tau_th", std::to_string(tau_th)},
      {"batch_size", std::to_string(batch_size)},
      {"hidden", join(hidden)},
      {"adam_kappa0", fmt(adam.kappa0)},
      {"adam_beta_p", fmt(adam.beta_p)},
      {"adam_beta_q", fmt(adam.beta_q)},
      {"adam_epsilon", fmt(adam.epsilon)},
      {"test_fraction", fmt(test_fraction)},
      {"partition", partition == fl::PartitionMode::iid ? "iid" : "noniid"},
      {"noniid_pieces", std::to_string(noniid_pieces)},
      {"early_stop", early_stop ? "true" : "false"},
      {"stop_window", std::to_string(stop_window)},
      {"stop_threshold", fmt(stop_threshold)},
      {"freshness_a", fmt(freshness.a)},
      {"freshness_b", fmt(freshness.b)},
      {"data", synthetic ? "synthetic" : "files"},
      {"synth.num_areas", std::to_string(synth.num_areas)},
      {"synth.num_locations", std::to_string(synth.num_locations)},
      {"synth.num_samples", std::to_string(synth.num_samples)},
      {"synth.significant_fraction", fmt(synth.significant_fraction)},
      {"synth.aadf_high_mean", fmt(synth.aadf_high_mean)},
      {"synth.aadf_low_mean", fmt(synth.aadf_low_mean)},
      {"synth.num_years", std::to_string(synth.num_years)},
      {"synth.seed", std::to_string(synth.seed)},
      {"aadf_path", aadf_path.string()},
      {"accident_path", accident_path.string()},
      {"schema_path", schema_path.string()},
      {"seed", std::to_string(seed)},
  };
}

}  // namespace iovfl::sim
