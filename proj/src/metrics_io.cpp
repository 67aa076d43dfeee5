#include "iovfl/metrics_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "text_util.hpp"

namespace iovfl::sim {
namespace {

std::string fmt(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void numbered(std::vector<std::string>& h, const std::string& stem, int count) {
  for (int k = 1; k <= count; ++k) h.push_back(stem + "_" + std::to_string(k));
}

template <class T>
void padded(std::vector<std::string>& row, const std::vector<T>& v, int count) {
  for (int k = 0; k < count; ++k) {
    if (static_cast<std::size_t>(k) >= v.size()) row.emplace_back();
    else if constexpr (std::is_floating_point_v<T>) row.push_back(fmt(v[static_cast<std::size_t>(k)]));
    else row.push_back(std::to_string(v[static_cast<std::size_t>(k)]));
  }
}

}  // namespace

MetricsFormat format_from_string(const std::string& s) {
  if (s == "csv") return MetricsFormat::csv;
  if (s == "jsonl" || s == "json-lines") return MetricsFormat::jsonl;
  throw std::invalid_argument("unknown metrics format '" + s + "'");
}

std::vector<std::string> csv_header(int num_selected, int num_types) {
  std::vector<std::string> h{"round"};
  numbered(h, "selected_sv_id", num_selected);
  numbered(h, "zeta", num_selected);
  numbered(h, "sv_profit", num_selected);
  numbered(h, "vsp_profit_type", num_types);
  numbered(h, "social_welfare_type", num_types);
  for (const char* c : {"global_loss", "accuracy", "omega", "net_vsp_profit", "net_social_welfare",
                        "contract_iterations", "contract_converged", "num_candidates", "topped_up"})
    h.emplace_back(c);
  return h;
}

void write_metrics(std::ostream& out, std::span<const RoundMetrics> metrics, int num_selected, int num_types,
                   MetricsFormat format) {
  if (format == MetricsFormat::jsonl) {
    for (const auto& m : metrics) {
      nlohmann::ordered_json j;
      j["round"] = m.round;
      j["selected_sv_ids"] = m.selected_sv_ids;
      j["zeta_values"] = m.zeta_values;
      j["sv_profits"] = m.sv_profits;
      j["vsp_profit_per_type"] = m.vsp_profit_per_type;
      j["social_welfare_per_type"] = m.social_welfare_per_type;
      j["global_loss"] = m.global_loss;
      j["accuracy"] = m.accuracy;
      j["omega"] = m.omega;
      j["net_vsp_profit"] = m.net_vsp_profit;
      j["net_social_welfare"] = m.net_social_welfare;
      j["contract_iterations"] = m.contract_iterations;
      j["contract_converged"] = m.contract_converged;
      j["num_candidates"] = m.num_candidates;
      j["topped_up"] = m.topped_up;
      out << j.dump() << '\n';
    }
    return;
  }
  const auto header = csv_header(num_selected, num_types);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& m : metrics) {
    std::vector<std::string> row{std::to_string(m.round)};
    padded(row, m.selected_sv_ids, num_selected);
    padded(row, m.zeta_values, num_selected);
    padded(row, m.sv_profits, num_selected);
    padded(row, m.vsp_profit_per_type, num_types);
    padded(row, m.social_welfare_per_type, num_types);
    for (const double v : {m.global_loss, m.accuracy, m.omega, m.net_vsp_profit, m.net_social_welfare})
      row.push_back(fmt(v));
    row.push_back(std::to_string(m.contract_iterations));
    row.push_back(m.contract_converged ? "1" : "0");
    row.push_back(std::to_string(m.num_candidates));
    row.push_back(m.topped_up ? "1" : "0");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

void emit_metrics(std::span<const RoundMetrics> metrics, const std::filesystem::path& path, int num_selected,
                  int num_types, MetricsFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics to " + path.string());
  write_metrics(out, metrics, num_selected, num_types, format);
  out.flush();
  if (!out) throw std::runtime_error("I/O error writing " + path.string());
}

std::vector<RoundMetrics> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics csv: missing header");
  const auto header = detail::split_csv_line(line);
  std::vector<RoundMetrics> out;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw std::runtime_error("metrics csv: ragged row");
    RoundMetrics m;
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string& h = header[c];
      const std::string& v = cells[c];
      const auto num = [&] {
        const auto x = detail::parse_number<double>(v);
        if (!x) throw std::runtime_error("metrics csv: bad number '" + v + "' in " + h);
        return *x;
      };
      auto stem_is = [&](const char* stem) { return h.rfind(stem, 0) == 0 && h.size() > std::string(stem).size(); };
      if (h == "round") m.round = static_cast<int>(num());
      else if (v.empty()) continue;
      else if (stem_is("selected_sv_id_")) m.selected_sv_ids.push_back(static_cast<int>(num()));
      else if (stem_is("zeta_")) m.zeta_values.push_back(num());
      else if (stem_is("sv_profit_")) m.sv_profits.push_back(num());
      else if (stem_is("vsp_profit_type_")) m.vsp_profit_per_type.push_back(num());
      else if (stem_is("social_welfare_type_")) m.social_welfare_per_type.push_back(num());
      else if (h == "global_loss") m.global_loss = num();
      else if (h == "accuracy") m.accuracy = num();
      else if (h == "omega") m.omega = num();
      else if (h == "net_vsp_profit") m.net_vsp_profit = num();
      else if (h == "net_social_welfare") m.net_social_welfare = num();
      else if (h == "contract_iterations") m.contract_iterations = static_cast<int>(num());
      else if (h == "contract_converged") m.contract_converged = num() != 0.0;
      else if (h == "num_candidates") m.num_candidates = static_cast<int>(num());
      else if (h == "topped_up") m.topped_up = num() != 0.0;
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace iovfl::sim
