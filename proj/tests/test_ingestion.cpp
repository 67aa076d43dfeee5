#include <doctest.h>

#include <fstream>
#include <sstream>

#include "iovfl/ingestion.hpp"

using namespace iovfl::ingest;

TEST_CASE("aadf row maps directly to a record") {
  std::istringstream in("area_id,year,day_of_year,aadf_count\n3,2004,120,5400\n");
  const auto p = parse_aadf_csv(in);
  REQUIRE(p.records.size() == 1);
  CHECK(p.records[0] == AreaRecord{3, 2004, 120, 5400.0});
  CHECK(p.stats.skipped == 0);
}

TEST_CASE("aadf header only gives no records") {
  std::istringstream in("area_id,year,day_of_year,aadf_count\n");
  const auto p = parse_aadf_csv(in);
  CHECK(p.records.empty());
  CHECK(p.stats.warnings.empty());
}

TEST_CASE("aadf day outside the year is skipped with one warning") {
  std::istringstream in("area_id,year,day_of_year,aadf_count\n3,2004,400,5400\n4,2004,1,10\n");
  const auto p = parse_aadf_csv(in);
  REQUIRE(p.records.size() == 1);
  CHECK(p.records[0].area_id == 4);
  CHECK(p.stats.skipped == 1);
  CHECK(p.stats.warnings.size() == 1);
}

TEST_CASE("aadf malformed and negative rows are skipped") {
  std::istringstream in(
      "area_id,year,day_of_year,aadf_count\n"
      "x,2004,1,10\n"
      "5,2004,1,-3\n"
      "6,2004,1\n"
      "7,2004,2,11\n");
  const auto p = parse_aadf_csv(in);
  REQUIRE(p.records.size() == 1);
  CHECK(p.records[0].area_id == 7);
  CHECK(p.stats.skipped == 3);
}

TEST_CASE("aadf header must match the documented columns") {
  std::istringstream in("area_id,year,aadf_count\n1,2000,5\n");
  CHECK_THROWS(parse_aadf_csv(in));
}

TEST_CASE("warnings are capped") {
  std::ostringstream text;
  text << "area_id,year,day_of_year,aadf_count\n";
  for (int i = 0; i < 100; ++i) text << "1,2000,999,5\n";
  std::istringstream in(text.str());
  const auto p = parse_aadf_csv(in);
  CHECK(p.stats.skipped == 100);
  CHECK(p.stats.warnings.size() == kMaxWarnings);
}

TEST_CASE("accident hour, weekday and severity mapping") {
  std::istringstream in(
      "location_id,day,hour,light,weather,road_surface,severity\n"
      "2,2023-10-15,23,daylight,rain,wet,1\n"
      "3,1,07:45,dark_lit,fine,dry,4\n"
      "4,16/10/2023,0,dark_unlit,fog,ice,2\n");
  const auto p = parse_accident_csv(in);
  REQUIRE(p.records.size() == 2);
  CHECK(p.records[0] == AccidentRecord{2, 7, 23, 0, 1, 1, 1});
  CHECK(p.records[1] == AccidentRecord{4, 1, 0, 2, 3, 3, 2});
  CHECK(p.stats.skipped == 1);
}

TEST_CASE("accident unknown categories and locations are skipped") {
  std::istringstream in(
      "location_id,day,hour,light,weather,road_surface,severity\n"
      "1,1,1,twilight,fine,dry,0\n"
      "0,1,1,daylight,fine,dry,0\n"
      "1,1,24,daylight,fine,dry,0\n"
      "1,8,1,daylight,fine,dry,0\n"
      "1,1,1,daylight,fine,dry,0\n");
  const auto p = parse_accident_csv(in);
  CHECK(p.records.size() == 1);
  CHECK(p.stats.skipped == 4);
}

TEST_CASE("iso weekday") {
  CHECK(iso_weekday(2023, 10, 15) == 7);
  CHECK(iso_weekday(2023, 10, 16) == 1);
  CHECK(iso_weekday(2000, 1, 1) == 6);
  CHECK(parse_day_category("2023-10-15") == 7);
  CHECK(parse_day_category("15/10/2023") == 7);
  CHECK(parse_day_category("3") == 3);
  CHECK(parse_day_category("0") == 0);
  CHECK(parse_day_category("2023-02-30") == 0);
  CHECK(parse_day_category("monday") == 0);
  CHECK(parse_hour_category("23") == 23);
  CHECK(parse_hour_category("09:30") == 9);
  CHECK(parse_hour_category("24") == -1);
  CHECK(parse_hour_category("") == -1);
}

TEST_CASE("column mapping file adapts a foreign export") {
  const auto dir = std::filesystem::temp_directory_path() / "iovfl_test_mapping";
  std::filesystem::create_directories(dir);
  {
    std::ofstream m(dir / "map.conf");
    m << "col.location_id = Local_Authority\n"
         "col.day = Date\n"
         "col.hour = Time\n"
         "col.light = Light_Conditions\n"
         "col.weather = Weather_Conditions\n"
         "col.road_surface = Road_Surface_Conditions\n"
         "col.severity = Accident_Severity\n"
         "vocab.light = Daylight, Darkness\n"
         "vocab.weather = Fine, Raining\n"
         "vocab.road_surface = Dry, Wet\n"
         "max_location = 50\n"
         "severity.Fatal = 2\n"
         "severity.Serious = 1\n"
         "severity.Slight = 0\n";
  }
  const auto schema = AccidentSchema::from_file(dir / "map.conf");
  std::istringstream in(
      "Accident_Severity,Date,Time,Local_Authority,Light_Conditions,Weather_Conditions,Road_Surface_Conditions\n"
      "Serious,01/01/2005,17:42,12,Darkness,Raining,Wet\n"
      "Unknown,01/01/2005,17:42,12,Darkness,Raining,Wet\n");
  const auto p = parse_accident_csv(in, schema);
  REQUIRE(p.records.size() == 1);
  CHECK(p.records[0] == AccidentRecord{12, 6, 17, 1, 1, 1, 1});
  CHECK(p.stats.skipped == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("shipped UK mapping reads coded rows") {
  const auto schema = AccidentSchema::from_file(std::filesystem::path(IOVFL_CONFIG_DIR) / "uk_mapping.conf");
  std::istringstream in(
      "Accident_Index,Local_Authority_(District),Date,Time,Light_Conditions,Weather_Conditions,"
      "Road_Surface_Conditions,Accident_Severity\n"
      "a,12,04/01/2015,17:42,4,1,2,3\n"
      "b,300,05/01/2015,08:05,1,2,1,1\n"
      "c,-1,05/01/2015,08:05,1,2,1,1\n");
  const auto p = parse_accident_csv(in, schema);
  REQUIRE(p.records.size() == 2);
  CHECK(p.records[0] == AccidentRecord{12, 7, 17, 1, 0, 1, 0});
  CHECK(p.records[1] == AccidentRecord{300, 1, 8, 0, 1, 0, 2});
  CHECK(p.stats.skipped == 1);
}

TEST_CASE("writers round-trip through the parsers") {
  SynthConfig cfg;
  cfg.num_areas = 6;
  cfg.num_samples = 200;
  const auto data = synth_generate(cfg);

  std::stringstream a;
  write_aadf_csv(a, data.areas);
  const auto pa = parse_aadf_csv(a);
  CHECK(pa.records == data.areas);

  std::stringstream b;
  write_accident_csv(b, data.accidents);
  const auto pb = parse_accident_csv(b);
  CHECK(pb.records == data.accidents);
}

TEST_CASE("synthetic generator is deterministic") {
  SynthConfig cfg;
  cfg.num_areas = 12;
  cfg.num_samples = 300;
  std::ostringstream x1, x2, y1, y2;
  const auto d1 = synth_generate(cfg);
  const auto d2 = synth_generate(cfg);
  write_aadf_csv(x1, d1.areas);
  write_aadf_csv(x2, d2.areas);
  write_accident_csv(y1, d1.accidents);
  write_accident_csv(y2, d2.accidents);
  CHECK(x1.str() == x2.str());
  CHECK(y1.str() == y2.str());

  cfg.seed = 2;
  std::ostringstream x3;
  write_aadf_csv(x3, synth_generate(cfg).areas);
  CHECK(x3.str() != x1.str());
}

TEST_CASE("synthetic high-mean area count follows the fraction") {
  SynthConfig cfg;
  cfg.num_areas = 190;
  cfg.significant_fraction = 0.5;
  cfg.num_samples = 10;
  const auto d = synth_generate(cfg);
  CHECK(d.high_mean_areas.size() == 95);
  CHECK(d.areas.size() == 190u * 365u);
}

TEST_CASE("synthetic generator with no samples") {
  SynthConfig cfg;
  cfg.num_areas = 3;
  cfg.num_samples = 0;
  const auto d = synth_generate(cfg);
  CHECK(d.accidents.empty());
  CHECK_FALSE(d.areas.empty());
}

TEST_CASE("synthetic labels use every class and stay in range") {
  SynthConfig cfg;
  cfg.num_areas = 5;
  cfg.num_samples = 3000;
  const auto d = synth_generate(cfg);
  int counts[kNumSeverities] = {};
  for (const auto& r : d.accidents) {
    REQUIRE(r.severity >= 0);
    REQUIRE(r.severity < kNumSeverities);
    CHECK(r.location_id >= 1);
    CHECK(r.location_id <= cfg.num_locations);
    ++counts[r.severity];
  }
  for (const int c : counts) CHECK(c > 500);
}

TEST_CASE("parsing from files") {
  const std::filesystem::path dir = IOVFL_TEST_DATA_DIR;
  const auto a = parse_aadf_csv(dir / "aadf_small.csv");
  CHECK(a.records.size() == 3);
  const auto b = parse_accident_csv(dir / "accidents_small.csv");
  REQUIRE(b.records.size() == 2);
  CHECK(b.records[0].day_category == 7);
  CHECK(b.records[1].severity == 2);
  CHECK_THROWS(parse_aadf_csv(dir / "does_not_exist.csv"));
}
