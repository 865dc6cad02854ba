#include "mobmine/semantics.hpp"

#include <algorithm>
#include <cmath>

#include "mobmine/errors.hpp"
#include "mobmine/timeutil.hpp"

namespace mobmine {

std::vector<ClassifiedTrip> classify_trips(std::span<const TripRecord> user_trips,
                                           const PlaceLabeling& labeling,
                                           std::optional<int> home, std::optional<int> work,
                                           const GridSpec& grid) {
  if (user_trips.size() != labeling.origin_pids.size()) {
    throw DataError("classify_trips: trips not present in labeling");
  }
  std::vector<ClassifiedTrip> out;
  out.reserve(user_trips.size());
  for (std::size_t i = 0; i < user_trips.size(); ++i) {
    ClassifiedTrip c;
    c.base = user_trips[i];
    const int o = labeling.origin_pids[i];
    const int d = labeling.dest_pids[i];
    const bool commutes = home && work &&
                          ((o == *home && d == *work) || (o == *work && d == *home));
    c.klass = commutes ? TripClass::commuting : TripClass::non_commuting;
    c.duration_min = static_cast<double>(c.base.d_time - c.base.o_time) / 60.0;
    c.origin_cell = grid_index(c.base.origin, grid);
    c.dest_cell = grid_index(c.base.dest, grid);
    out.push_back(std::move(c));
  }
  return out;
}

GapSeries gap_times(std::span<const TripRecord> user_trips) {
  if (user_trips.empty()) throw DataError("gap_times: no trips");
  GapSeries s;
  s.user = user_trips.front().p_id;
  std::vector<std::int64_t> starts;
  starts.reserve(user_trips.size());
  for (const auto& t : user_trips) starts.push_back(t.o_time);
  std::sort(starts.begin(), starts.end());
  for (std::size_t i = 1; i < starts.size(); ++i) {
    s.gaps_min.push_back(static_cast<double>(starts[i] - starts[i - 1]) / 60.0);
  }
  return s;
}

std::map<int, double> mean_gap_by_monthly_trips(std::span<const TripRecord> records,
                                                int tz_offset_hours) {
  // (user, month) -> start times
  std::map<std::pair<std::string, int>, std::vector<std::int64_t>> cells;
  for (const auto& r : records) {
    cells[{r.p_id, month_key(r.o_time, tz_offset_hours)}].push_back(r.o_time);
  }
  std::map<int, std::pair<double, std::int64_t>> acc;  // count -> (gap sum, n gaps)
  for (auto& [key, starts] : cells) {
    if (starts.size() < 2) continue;
    std::sort(starts.begin(), starts.end());
    auto& a = acc[static_cast<int>(starts.size())];
    for (std::size_t i = 1; i < starts.size(); ++i) {
      a.first += static_cast<double>(starts[i] - starts[i - 1]) / 60.0;
      ++a.second;
    }
  }
  std::map<int, double> out;
  for (const auto& [count, a] : acc) out[count] = a.first / static_cast<double>(a.second);
  return out;
}

HistogramSet temporal_histograms(std::span<const ClassifiedTrip> trips,
                                 const DateWindow& window, int tz_offset_hours,
                                 double gap_bin_min, double gap_max_min) {
  HistogramSet h;
  h.gap_bin_min = gap_bin_min;
  h.gap_histogram.assign(static_cast<std::size_t>(std::ceil(gap_max_min / gap_bin_min)), 0);

  std::array<std::array<std::int64_t, 24>, 2> hour_totals{};
  std::map<std::string, std::vector<std::int64_t>> starts_by_user;
  for (const auto& t : trips) {
    const std::int64_t day = local_day(t.base.o_time, tz_offset_hours);
    const int cls = static_cast<int>(t.klass);
    auto& daily = h.daily_counts[day];
    ++daily[cls];
    ++hour_totals[cls][hour_of_day(t.base.o_time, tz_offset_hours)];
    starts_by_user[t.base.p_id].push_back(t.base.o_time);
  }
  const double n_days = static_cast<double>(std::max<std::int64_t>(1, window.n_days()));
  for (int cls = 0; cls < 2; ++cls) {
    for (int hr = 0; hr < 24; ++hr) {
      h.hourly_profile[cls][hr] = static_cast<double>(hour_totals[cls][hr]) / n_days;
    }
  }
  for (auto& [user, starts] : starts_by_user) {
    std::sort(starts.begin(), starts.end());
    for (std::size_t i = 1; i < starts.size(); ++i) {
      const double gap = static_cast<double>(starts[i] - starts[i - 1]) / 60.0;
      const auto bin = static_cast<std::size_t>(gap / gap_bin_min);
      if (bin < h.gap_histogram.size()) ++h.gap_histogram[bin];
    }
  }
  return h;
}

std::map<int, std::int64_t> place_count_distribution(std::span<const UserPlaces> users) {
  std::map<int, std::int64_t> out;
  for (const auto& u : users) ++out[u.labeling.place_count()];
  return out;
}

std::array<GridDistanceMap, 2> grid_mean_distance(std::span<const ClassifiedTrip> trips,
                                                  const GridSpec& grid, bool parallel) {
  constexpr std::size_t kBlock = 8192;
  const std::size_t n = trips.size();
  const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
  std::vector<std::array<GridDistanceMap, 2>> partial(n_blocks);

#pragma omp parallel for schedule(static) if (parallel && n_blocks > 1)
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t lo = b * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& t = trips[i];
      const auto cell = grid_index(t.base.origin, grid);
      if (!cell) continue;
      auto& st = partial[b][static_cast<int>(t.klass)][*cell];
      st.sum_km += t.base.distance_km;
      ++st.count;
    }
  }
  std::array<GridDistanceMap, 2> out;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    for (int cls = 0; cls < 2; ++cls) {
      for (const auto& [cell, st] : partial[b][cls]) {
        auto& dst = out[cls][cell];
        dst.sum_km += st.sum_km;
        dst.count += st.count;
      }
    }
  }
  return out;
}

HomeWorkCells home_work_cell_counts(std::span<const UserPlaces> users, const GridSpec& grid) {
  HomeWorkCells out;
  for (const auto& u : users) {
    if (u.home) {
      if (const auto cell = grid_index(place_centroid(u.labeling, u.home->pid), grid)) {
        ++out.home[*cell];
      }
    }
    if (u.work) {
      if (const auto cell = grid_index(place_centroid(u.labeling, u.work->pid), grid)) {
        ++out.work[*cell];
      }
    }
  }
  return out;
}

std::vector<RankCurvePoint> rank_probability_curves(std::span<const UserPlaces> users) {
  // (place count, rank) -> (probability sum, users)
  std::map<std::pair<int, int>, std::pair<double, std::int64_t>> acc;
  for (const auto& u : users) {
    const int pc = u.labeling.place_count();
    for (const auto& rp : rank_places(u.labeling)) {
      auto& a = acc[{pc, rp.rank}];
      a.first += rp.visit_probability;
      ++a.second;
    }
  }
  std::vector<RankCurvePoint> out;
  out.reserve(acc.size());
  for (const auto& [key, a] : acc) {
    out.push_back({key.first, key.second, a.first / static_cast<double>(a.second), a.second});
  }
  return out;
}

}  // namespace mobmine
