#pragma once

// Road-traffic dataset ingestion: the AADF (traffic volume) table, the
// accident table, and a seeded synthetic generator that writes the same
// schemas when the real files are not available.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iovfl::ingest {

inline constexpr int kNumSeverities = 3;
inline constexpr int kNumDayCategories = 7;
inline constexpr int kNumHourCategories = 24;
inline constexpr int kDaysPerYear = 365;

struct AreaRecord {
  int area_id = 0;
  int year = 0;
  int day_of_year = 1;  // 1..365
  double aadf_count = 0.0;

  friend bool operator==(const AreaRecord&, const AreaRecord&) = default;
};

// Categorical fields are stored as integer codes. Light, weather and road
// surface index into the vocabularies of the AccidentSchema in use.
struct AccidentRecord {
  int location_id = 1;    // 1..max_location
  int day_category = 1;   // ISO weekday, Mon=1 .. Sun=7
  int hour_category = 0;  // 0..23
  int light = 0;
  int weather = 0;
  int road_surface = 0;
  int severity = 0;  // 0..2

  friend bool operator==(const AccidentRecord&, const AccidentRecord&) = default;
};

/// Column names and categorical vocabularies of the accident CSV.
///
/// Defaults describe the canonical schema written by the synthetic generator
/// (see docs/schema.md). A column-mapping file adapts other exports, e.g. the
/// UK road-safety tables, without code changes.
struct AccidentSchema {
  std::string col_location = "location_id";
  std::string col_day = "day";
  std::string col_hour = "hour";
  std::string col_light = "light";
  std::string col_weather = "weather";
  std::string col_surface = "road_surface";
  std::string col_severity = "severity";

  std::vector<std::string> light_vocab{"daylight", "dark_lit", "dark_unlit"};
  std::vector<std::string> weather_vocab{"fine", "rain", "snow", "fog", "wind"};
  std::vector<std::string> surface_vocab{"dry", "wet", "snow", "ice", "flood"};
  int max_location = 416;

  // Raw severity label -> class in {0,1,2}. Empty means "0","1","2" map to
  // themselves.
  std::map<std::string, int> severity_map;

  /// Reads `key = value` lines (col.*, vocab.*, max_location, severity.<raw>).
  static AccidentSchema from_file(const std::filesystem::path& path);

  void validate() const;
};

struct ParseStats {
  std::size_t rows = 0;
  std::size_t accepted = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;  // capped; see kMaxWarnings
};

inline constexpr std::size_t kMaxWarnings = 32;

template <class Record>
struct Parsed {
  std::vector<Record> records;
  ParseStats stats;
};

Parsed<AreaRecord> parse_aadf_csv(const std::filesystem::path& path);
Parsed<AreaRecord> parse_aadf_csv(std::istream& in);

Parsed<AccidentRecord> parse_accident_csv(const std::filesystem::path& path,
                                          const AccidentSchema& schema = {});
Parsed<AccidentRecord> parse_accident_csv(std::istream& in,
                                          const AccidentSchema& schema = {});

void write_aadf_csv(std::ostream& out, std::span<const AreaRecord> records);
void write_accident_csv(std::ostream& out, std::span<const AccidentRecord> records,
                        const AccidentSchema& schema = {});

/// ISO weekday (Mon=1 .. Sun=7) of a proleptic Gregorian date.
int iso_weekday(int year, unsigned month, unsigned day);

/// Accepts a weekday code "1".."7", an ISO date "YYYY-MM-DD" or a UK-style
/// "DD/MM/YYYY". Returns 0 when the text is none of these.
int parse_day_category(std::string_view text);

/// Accepts "0".."23" or "HH:MM". Returns -1 on failure.
int parse_hour_category(std::string_view text);

struct SynthConfig {
  int num_areas = 190;
  int num_locations = 20;
  int num_samples = 12000;
  double significant_fraction = 0.3;
  double aadf_high_mean = 40000.0;
  double aadf_low_mean = 8000.0;
  int num_years = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthData {
  std::vector<AreaRecord> areas;
  std::vector<AccidentRecord> accidents;
  std::vector<int> high_mean_areas;  // ascending area ids drawn with aadf_high_mean
};

/// Deterministic in `cfg` (including its seed). Severity depends on location,
/// time and conditions through a latent score so the labels are learnable but
/// noisy.
SynthData synth_generate(const SynthConfig& cfg, const AccidentSchema& schema = {});

}  // namespace iovfl::ingest
