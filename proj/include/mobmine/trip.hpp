#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mobmine/geo.hpp"

namespace mobmine {

// One ride record; field order in files follows the platform schema:
// R_id,P_id,D_id,O_LNG,O_LAT,D_LNG,D_LAT,O_Time,D_Time,L
struct TripRecord {
  std::string r_id;
  std::string p_id;
  std::string d_id;
  GeoPoint origin;
  GeoPoint dest;
  std::int64_t o_time = 0;  // epoch seconds
  std::int64_t d_time = 0;
  double distance_km = 0.0;  // platform-reported travel distance
};

struct CleaningReport {
  std::uint64_t total_read = 0;
  std::uint64_t rejected_parse = 0;
  std::uint64_t rejected_region = 0;
  std::uint64_t rejected_speed = 0;
  std::uint64_t rejected_time_order = 0;
  std::uint64_t retained = 0;

  bool reconciles() const {
    return retained + rejected_parse + rejected_region + rejected_speed +
               rejected_time_order ==
           total_read;
  }
};

struct ParseOptions {
  char delimiter = ',';
  bool header = true;
  int tz_offset_hours = 8;
};

struct ParseResult {
  std::vector<TripRecord> records;
  // fragment: total_read / rejected_parse / rejected_time_order; retained is
  // the parsed count until clean() refines it
  CleaningReport report;
};

// Malformed lines (wrong arity, bad number or timestamp, out-of-range
// coordinates, non-positive distance) are counted and skipped. d_time <=
// o_time counts separately as rejected_time_order. Throws DataError on an
// unreadable stream or when nothing parses.
ParseResult parse_records(std::istream& in, const ParseOptions& opt = {});
ParseResult parse_records_file(const std::string& path, const ParseOptions& opt = {});

struct CleanOptions {
  double speed_cap_kmh = 120.0;
  bool convert_gcj02 = false;
  bool parallel = true;
};

struct CleanResult {
  std::vector<TripRecord> records;
  // fragment: total_read (= input count) / rejected_region / rejected_speed /
  // retained
  CleaningReport report;
};

// Step 1 optionally converts both endpoints from GCJ-02, step 2 drops
// records with either endpoint outside the region, step 3 drops mean speed
// strictly above the cap. Order-preserving.
CleanResult clean(std::vector<TripRecord> records, const Region& region,
                  const CleanOptions& opt = {});

// combine a parse fragment with the clean fragment over the same stream
CleaningReport merge_reports(const CleaningReport& parse_fragment,
                             const CleaningReport& clean_fragment);

enum class FrequencyMode { per_month_strict, monthly_average };

// Users with strictly more than min_trips_per_month in every listed calendar
// month (or in total vs. min * n_months for the average mode). month_keys
// are year*12+month-1 values.
std::set<std::string> select_frequent_users(std::span<const TripRecord> records,
                                            int min_trips_per_month,
                                            std::span<const int> month_keys,
                                            FrequencyMode mode, int tz_offset_hours);

// Table-1-conformant delimited text with header; floats use shortest
// round-trip formatting so emit -> parse -> emit is a fixpoint.
void write_records(std::ostream& out, std::span<const TripRecord> records,
                   char delimiter = ',');

std::string format_double(double v);  // shortest round-trip representation

}  // namespace mobmine
