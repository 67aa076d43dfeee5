#include "iovfl/ingestion.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "text_util.hpp"

namespace iovfl::ingest {
namespace {

using detail::parse_number;
using detail::split_csv_line;
using detail::trim;

void warn(ParseStats& stats, std::size_t line_no, const std::string& why) {
  ++stats.skipped;
  if (stats.warnings.size() < kMaxWarnings)
    stats.warnings.push_back("line " + std::to_string(line_no) + ": " + why);
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

int vocab_index(const std::vector<std::string>& vocab, std::string_view value) {
  const auto it = std::find(vocab.begin(), vocab.end(), value);
  return it == vocab.end() ? -1 : static_cast<int>(it - vocab.begin());
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::vector<std::string> require_header(std::istream& in, std::string_view what) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(std::string(what) + ": missing header row");
  return split_csv_line(line);
}

}  // namespace

void AccidentSchema::validate() const {
  if (max_location < 1) throw std::invalid_argument("schema: max_location must be >= 1");
  for (const auto* vocab : {&light_vocab, &weather_vocab, &surface_vocab})
    if (vocab->empty()) throw std::invalid_argument("schema: empty categorical vocabulary");
  for (const auto& [raw, cls] : severity_map)
    if (cls < 0 || cls >= kNumSeverities)
      throw std::invalid_argument("schema: severity." + raw + " maps outside 0..2");
}

AccidentSchema AccidentSchema::from_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  AccidentSchema schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));

    if (key == "col.location_id") schema.col_location = value;
    else if (key == "col.day") schema.col_day = value;
    else if (key == "col.hour") schema.col_hour = value;
    else if (key == "col.light") schema.col_light = value;
    else if (key == "col.weather") schema.col_weather = value;
    else if (key == "col.road_surface") schema.col_surface = value;
    else if (key == "col.severity") schema.col_severity = value;
    else if (key == "vocab.light") schema.light_vocab = detail::split_list(value);
    else if (key == "vocab.weather") schema.weather_vocab = detail::split_list(value);
    else if (key == "vocab.road_surface") schema.surface_vocab = detail::split_list(value);
    else if (key == "max_location") {
      const auto v = parse_number<int>(value);
      if (!v) throw std::invalid_argument("schema: bad max_location '" + value + "'");
      schema.max_location = *v;
    } else if (key.rfind("severity.", 0) == 0) {
      const auto v = parse_number<int>(value);
      if (!v) throw std::invalid_argument("schema: bad severity class '" + value + "'");
      schema.severity_map[key.substr(9)] = *v;
    } else {
      throw std::invalid_argument("schema: unknown key '" + key + "'");
    }
  }
  schema.validate();
  return schema;
}

int iso_weekday(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) return 0;
  return static_cast<int>(weekday{sys_days{ymd}}.iso_encoding());
}

int parse_day_category(std::string_view text) {
  text = trim(text);
  if (const auto code = parse_number<int>(text)) return (*code >= 1 && *code <= 7) ? *code : 0;

  auto field = [&](std::size_t pos, std::size_t len) { return parse_number<int>(text.substr(pos, len)); };
  if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    const auto y = field(0, 4), m = field(5, 2), d = field(8, 2);
    if (y && m && d && *m > 0 && *d > 0) return iso_weekday(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d));
  }
  if (text.size() == 10 && text[2] == '/' && text[5] == '/') {
    const auto d = field(0, 2), m = field(3, 2), y = field(6, 4);
    if (y && m && d && *m > 0 && *d > 0) return iso_weekday(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d));
  }
  return 0;
}

int parse_hour_category(std::string_view text) {
  text = trim(text);
  const auto colon = text.find(':');
  const auto hour = parse_number<int>(colon == std::string_view::npos ? text : text.substr(0, colon));
  if (!hour || *hour < 0 || *hour > 23) return -1;
  if (colon != std::string_view::npos) {
    const auto minute = parse_number<int>(text.substr(colon + 1));
    if (!minute || *minute < 0 || *minute > 59) return -1;
  }
  return *hour;
}

Parsed<AreaRecord> parse_aadf_csv(std::istream& in) {
  static const std::vector<std::string> kHeader{"area_id", "year", "day_of_year", "aadf_count"};
  if (require_header(in, "AADF csv") != kHeader)
    throw std::runtime_error("AADF csv: header must be area_id,year,day_of_year,aadf_count");

  Parsed<AreaRecord> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++out.stats.rows;
    const auto cells = split_csv_line(line);
    if (cells.size() != kHeader.size()) {
      warn(out.stats, line_no, "expected 4 fields");
      continue;
    }
    const auto area = parse_number<int>(cells[0]);
    const auto year = parse_number<int>(cells[1]);
    const auto day = parse_number<int>(cells[2]);
    const auto count = parse_number<double>(cells[3]);
    if (!area || !year || !day || !count) {
      warn(out.stats, line_no, "non-numeric field");
      continue;
    }
    if (*day < 1 || *day > kDaysPerYear) {
      warn(out.stats, line_no, "day_of_year outside 1..365");
      continue;
    }
    if (!(*count >= 0.0) || !std::isfinite(*count)) {
      warn(out.stats, line_no, "negative or non-finite aadf_count");
      continue;
    }
    out.records.push_back({*area, *year, *day, *count});
  }
  out.stats.accepted = out.records.size();
  return out;
}

Parsed<AreaRecord> parse_aadf_csv(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_aadf_csv(in);
}

Parsed<AccidentRecord> parse_accident_csv(std::istream& in, const AccidentSchema& schema) {
  schema.validate();
  const auto header = require_header(in, "accident csv");
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("accident csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_loc = column(schema.col_location), c_day = column(schema.col_day),
                    c_hour = column(schema.col_hour), c_light = column(schema.col_light),
                    c_weather = column(schema.col_weather), c_surface = column(schema.col_surface),
                    c_sev = column(schema.col_severity);

  Parsed<AccidentRecord> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++out.stats.rows;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      warn(out.stats, line_no, "field count differs from header");
      continue;
    }
    AccidentRecord rec;
    const auto loc = parse_number<int>(cells[c_loc]);
    if (!loc || *loc < 1 || *loc > schema.max_location) {
      warn(out.stats, line_no, "location_id outside 1..max_location");
      continue;
    }
    rec.location_id = *loc;
    rec.day_category = parse_day_category(cells[c_day]);
    if (rec.day_category == 0) {
      warn(out.stats, line_no, "unrecognised day '" + cells[c_day] + "'");
      continue;
    }
    rec.hour_category = parse_hour_category(cells[c_hour]);
    if (rec.hour_category < 0) {
      warn(out.stats, line_no, "unrecognised hour '" + cells[c_hour] + "'");
      continue;
    }
    rec.light = vocab_index(schema.light_vocab, cells[c_light]);
    rec.weather = vocab_index(schema.weather_vocab, cells[c_weather]);
    rec.road_surface = vocab_index(schema.surface_vocab, cells[c_surface]);
    if (rec.light < 0 || rec.weather < 0 || rec.road_surface < 0) {
      warn(out.stats, line_no, "unknown categorical value");
      continue;
    }
    if (schema.severity_map.empty()) {
      const auto sev = parse_number<int>(cells[c_sev]);
      rec.severity = (sev && *sev >= 0 && *sev < kNumSeverities) ? *sev : -1;
    } else {
      const auto it = schema.severity_map.find(cells[c_sev]);
      rec.severity = it == schema.severity_map.end() ? -1 : it->second;
    }
    if (rec.severity < 0) {
      warn(out.stats, line_no, "severity '" + cells[c_sev] + "' is not one of the 3 classes");
      continue;
    }
    out.records.push_back(rec);
  }
  out.stats.accepted = out.records.size();
  return out;
}

Parsed<AccidentRecord> parse_accident_csv(const std::filesystem::path& path, const AccidentSchema& schema) {
  auto in = open_or_throw(path);
  return parse_accident_csv(in, schema);
}

void write_aadf_csv(std::ostream& out, std::span<const AreaRecord> records) {
  out << "area_id,year,day_of_year,aadf_count\n";
  for (const auto& r : records)
    out << r.area_id << ',' << r.year << ',' << r.day_of_year << ',' << format_double(r.aadf_count) << '\n';
}

void write_accident_csv(std::ostream& out, std::span<const AccidentRecord> records,
                        const AccidentSchema& schema) {
  // Always written in the canonical layout; severity as the class code, so a
  // reader needs a schema without severity_map to re-read it.
  out << schema.col_location << ',' << schema.col_day << ',' << schema.col_hour << ',' << schema.col_light
      << ',' << schema.col_weather << ',' << schema.col_surface << ',' << schema.col_severity << '\n';
  for (const auto& r : records) {
    out << r.location_id << ',' << r.day_category << ',' << r.hour_category << ','
        << schema.light_vocab.at(static_cast<std::size_t>(r.light)) << ','
        << schema.weather_vocab.at(static_cast<std::size_t>(r.weather)) << ','
        << schema.surface_vocab.at(static_cast<std::size_t>(r.road_surface)) << ',' << r.severity << '\n';
  }
}

void SynthConfig::validate() const {
  if (num_areas < 2) throw std::invalid_argument("synth: num_areas must be >= 2");
  if (num_locations < 1) throw std::invalid_argument("synth: num_locations must be >= 1");
  if (num_samples < 0) throw std::invalid_argument("synth: num_samples must be >= 0");
  if (num_years < 1) throw std::invalid_argument("synth: num_years must be >= 1");
  if (!(significant_fraction > 0.0 && significant_fraction < 1.0))
    throw std::invalid_argument("synth: significant_fraction must lie in (0,1)");
  if (!(aadf_high_mean > 0.0) || !(aadf_low_mean > 0.0))
    throw std::invalid_argument("synth: AADF means must be positive");
}

SynthData synth_generate(const SynthConfig& cfg, const AccidentSchema& schema) {
  cfg.validate();
  schema.validate();
  if (cfg.num_locations > schema.max_location)
    throw std::invalid_argument("synth: num_locations exceeds schema max_location");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SynthData data;

  // Areas: exactly round(fraction * D) of them are high-traffic.
  std::vector<int> ids(static_cast<std::size_t>(cfg.num_areas));
  std::iota(ids.begin(), ids.end(), 1);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto num_high = static_cast<std::size_t>(std::lround(cfg.significant_fraction * cfg.num_areas));
  data.high_mean_areas.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(num_high));
  std::sort(data.high_mean_areas.begin(), data.high_mean_areas.end());

  constexpr int kBaseYear = 2000;
  data.areas.reserve(static_cast<std::size_t>(cfg.num_areas * cfg.num_years * kDaysPerYear));
  for (int area = 1; area <= cfg.num_areas; ++area) {
    const bool high = std::binary_search(data.high_mean_areas.begin(), data.high_mean_areas.end(), area);
    const double level = (high ? cfg.aadf_high_mean : cfg.aadf_low_mean) * (0.8 + 0.4 * unit(rng));
    for (int y = 0; y < cfg.num_years; ++y)
      for (int day = 1; day <= kDaysPerYear; ++day) {
        const double v = std::max(0.0, level * (1.0 + 0.1 * gauss(rng)));
        data.areas.push_back({area, kBaseYear + y, day, std::round(v)});
      }
  }

  // Accidents: latent severity score from additive per-category effects.
  auto effects = [&](std::size_t n, double scale) {
    std::vector<double> e(n);
    for (auto& x : e) x = scale * gauss(rng);
    return e;
  };
  const auto loc_effect = effects(static_cast<std::size_t>(cfg.num_locations), 1.0);
  const auto light_effect = effects(schema.light_vocab.size(), 0.6);
  const auto weather_effect = effects(schema.weather_vocab.size(), 0.6);
  const auto surface_effect = effects(schema.surface_vocab.size(), 0.6);
  const auto day_effect = effects(kNumDayCategories, 0.4);
  const auto hour_effect = effects(kNumHourCategories, 0.5);

  // Condition codes are skewed towards code 0 (clear / dry / daylight).
  auto skewed_pick = [&](std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::pow(0.5, static_cast<double>(i));
    return std::discrete_distribution<int>(w.begin(), w.end())(rng);
  };

  std::uniform_int_distribution<int> pick_loc(1, cfg.num_locations), pick_day(1, kNumDayCategories),
      pick_hour(0, kNumHourCategories - 1);
  std::vector<double> scores;
  data.accidents.reserve(static_cast<std::size_t>(cfg.num_samples));
  scores.reserve(static_cast<std::size_t>(cfg.num_samples));
  for (int s = 0; s < cfg.num_samples; ++s) {
    AccidentRecord r;
    r.location_id = pick_loc(rng);
    r.day_category = pick_day(rng);
    r.hour_category = pick_hour(rng);
    const bool daytime = r.hour_category >= 7 && r.hour_category <= 18;
    r.light = daytime && unit(rng) < 0.9 ? 0 : skewed_pick(schema.light_vocab.size());
    r.weather = skewed_pick(schema.weather_vocab.size());
    r.road_surface = r.weather == 0 && unit(rng) < 0.8 ? 0 : skewed_pick(schema.surface_vocab.size());
    const double score = loc_effect[static_cast<std::size_t>(r.location_id - 1)] +
                         day_effect[static_cast<std::size_t>(r.day_category - 1)] +
                         hour_effect[static_cast<std::size_t>(r.hour_category)] +
                         light_effect[static_cast<std::size_t>(r.light)] +
                         weather_effect[static_cast<std::size_t>(r.weather)] +
                         surface_effect[static_cast<std::size_t>(r.road_surface)] + 0.5 * gauss(rng);
    scores.push_back(score);
    data.accidents.push_back(r);
  }

  // Tercile thresholds give roughly balanced classes.
  if (!scores.empty()) {
    auto sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted[sorted.size() / 3];
    const double hi = sorted[(2 * sorted.size()) / 3];
    for (std::size_t i = 0; i < scores.size(); ++i)
      data.accidents[i].severity = scores[i] < lo ? 0 : (scores[i] < hi ? 1 : 2);
  }
  return data;
}

}  // namespace iovfl::ingest
