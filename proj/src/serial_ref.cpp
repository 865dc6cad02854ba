#include "mobmine/serial_ref.hpp"

#include <algorithm>
#include <map>

namespace mobmine::serial_ref {

double log_likelihood(Family f, std::span<const double> params,
                      std::span<const double> data) {
  check_params(f, params);
  double total = 0.0;
  for (double x : data) total += log_pdf(f, params, x);
  return total;
}

CleanResult clean(std::vector<TripRecord> records, const Region& region,
                  const CleanOptions& opt) {
  CleanResult out;
  out.report.total_read = records.size();
  for (auto& r : records) {
    if (opt.convert_gcj02) {
      r.origin = gcj02_to_wgs84(r.origin);
      r.dest = gcj02_to_wgs84(r.dest);
    }
    if (!in_region(r.origin, region) || !in_region(r.dest, region)) {
      ++out.report.rejected_region;
      continue;
    }
    const double dt_s = static_cast<double>(r.d_time - r.o_time);
    if (r.distance_km * 3600.0 > opt.speed_cap_kmh * dt_s) {
      ++out.report.rejected_speed;
      continue;
    }
    out.records.push_back(std::move(r));
  }
  out.report.retained = out.records.size();
  return out;
}

std::vector<UserPlaces> mine_places(std::span<const TripRecord> records,
                                    const std::set<std::string>& users,
                                    const MinerConfig& cfg) {
  std::map<std::string, std::vector<TripRecord>> grouped;
  for (const auto& r : records) {
    if (users.count(r.p_id)) grouped[r.p_id].push_back(r);
  }
  std::vector<UserPlaces> out;
  out.reserve(grouped.size());
  for (auto& [user, trips] : grouped) {
    std::sort(trips.begin(), trips.end(), [](const TripRecord& a, const TripRecord& b) {
      if (a.o_time != b.o_time) return a.o_time < b.o_time;
      return a.r_id < b.r_id;
    });
    UserPlaces up;
    up.labeling = generate_places(trips, cfg);
    up.home = detect_home(up.labeling, trips, cfg);
    up.work = detect_work(up.labeling, trips, cfg,
                          up.home ? std::optional<int>(up.home->pid) : std::nullopt);
    up.trips = std::move(trips);
    out.push_back(std::move(up));
  }
  return out;
}

std::array<GridDistanceMap, 2> grid_mean_distance(std::span<const ClassifiedTrip> trips,
                                                  const GridSpec& grid) {
  std::array<GridDistanceMap, 2> out;
  for (const auto& t : trips) {
    const auto cell = grid_index(t.base.origin, grid);
    if (!cell) continue;
    auto& st = out[static_cast<int>(t.klass)][*cell];
    st.sum_km += t.base.distance_km;
    ++st.count;
  }
  return out;
}

std::pair<std::vector<TripRecord>, GroundTruth> generate_population(const SynthSpec& spec,
                                                                    std::uint64_t seed) {
  return mobmine::generate_population(spec, seed, /*parallel=*/false);
}

}  // namespace mobmine::serial_ref
