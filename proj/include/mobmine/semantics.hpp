#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mobmine/geo.hpp"
#include "mobmine/places.hpp"
#include "mobmine/trip.hpp"

namespace mobmine {

enum class TripClass : int { commuting = 0, non_commuting = 1 };

inline const char* trip_class_name(TripClass c) {
  return c == TripClass::commuting ? "commuting" : "non_commuting";
}

struct ClassifiedTrip {
  TripRecord base;
  TripClass klass = TripClass::non_commuting;
  double duration_min = 0.0;
  std::optional<GridCell> origin_cell;
  std::optional<GridCell> dest_cell;
};

// A trip commutes iff its endpoint PIDs are exactly {home, work} with both
// defined, in either direction. Trips must be the labeled user's trips in
// labeling order; a size mismatch raises DataError.
std::vector<ClassifiedTrip> classify_trips(std::span<const TripRecord> user_trips,
                                           const PlaceLabeling& labeling,
                                           std::optional<int> home, std::optional<int> work,
                                           const GridSpec& grid);

struct GapSeries {
  std::string user;
  std::vector<double> gaps_min;
};

// Start-time differences of consecutive trips (sorted by o_time) in minutes.
GapSeries gap_times(std::span<const TripRecord> user_trips);

// Groups (user, calendar month) cells with at least 2 trips by their trip
// count and pools the within-month gaps; returns count -> mean gap minutes.
std::map<int, double> mean_gap_by_monthly_trips(std::span<const TripRecord> records,
                                                int tz_offset_hours);

struct DateWindow {
  std::int64_t start_day = 0;  // inclusive local day indices
  std::int64_t end_day = 0;    // inclusive
  std::int64_t n_days() const { return end_day - start_day + 1; }
};

struct HistogramSet {
  std::map<std::int64_t, std::array<std::int64_t, 2>> daily_counts;  // day -> [com, non]
  std::array<std::array<double, 24>, 2> hourly_profile{};  // mean trips per hour per class
  std::vector<std::int64_t> gap_histogram;                 // fixed-width bins
  double gap_bin_min = 10.0;
  std::map<int, std::int64_t> place_count_histogram;  // filled by the caller
};

// Daily counts per class, hourly profile (hour of o_time averaged over the
// window's days) and the pooled gap histogram.
HistogramSet temporal_histograms(std::span<const ClassifiedTrip> trips,
                                 const DateWindow& window, int tz_offset_hours,
                                 double gap_bin_min = 10.0, double gap_max_min = 45000.0);

std::map<int, std::int64_t> place_count_distribution(std::span<const UserPlaces> users);

struct CellStat {
  double sum_km = 0.0;
  std::int64_t count = 0;
  double mean_km() const { return sum_km / static_cast<double>(count); }
};

using GridDistanceMap = std::map<GridCell, CellStat>;

// Mean reported distance of trips grouped by origin cell, one map per class;
// out-of-bounds origins are skipped. Parallel over fixed blocks with ordered
// merges, so results are thread-count independent.
std::array<GridDistanceMap, 2> grid_mean_distance(std::span<const ClassifiedTrip> trips,
                                                  const GridSpec& grid,
                                                  bool parallel = true);

struct HomeWorkCells {
  std::map<GridCell, std::int64_t> home;
  std::map<GridCell, std::int64_t> work;
};

// Per-cell counts of detected home/work place centroids.
HomeWorkCells home_work_cell_counts(std::span<const UserPlaces> users, const GridSpec& grid);

// Mean visit probability per rank within cohorts of users sharing a place
// count; plot-ready rank data.
struct RankCurvePoint {
  int place_count = 0;
  int rank = 0;
  double mean_probability = 0.0;
  std::int64_t users = 0;
};
std::vector<RankCurvePoint> rank_probability_curves(std::span<const UserPlaces> users);

}  // namespace mobmine
