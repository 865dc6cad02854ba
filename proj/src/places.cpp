#include "mobmine/places.hpp"

#include <algorithm>
#include <map>

#include "mobmine/errors.hpp"
#include "mobmine/timeutil.hpp"

namespace mobmine {

namespace {

struct LabelState {
  std::vector<GeoPoint> points;
  std::vector<int> pids;
  std::vector<int> match_edges;
  int max_pid = -1;

  // nearest previously labeled point strictly within d_th; distance ties go
  // to the lowest PID
  int nearest_within(const GeoPoint& p, double d_th) const {
    int best = -1;
    double best_d = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = haversine_m(p, points[i]);
      if (d >= d_th) continue;
      if (best < 0 || d < best_d || (d == best_d && pids[i] < pids[best])) {
        best = static_cast<int>(i);
        best_d = d;
      }
    }
    return best;
  }

  int add(const GeoPoint& p, int matched_idx) {
    int pid;
    if (matched_idx >= 0) {
      pid = pids[matched_idx];
    } else {
      pid = ++max_pid;
    }
    points.push_back(p);
    pids.push_back(pid);
    match_edges.push_back(matched_idx);
    return pid;
  }
};

bool hour_in_window(int hour, int begin, int end) { return hour >= begin && hour < end; }

}  // namespace

PlaceLabeling generate_places(std::span<const TripRecord> trips, const MinerConfig& cfg) {
  if (trips.empty()) throw DataError("generate_places: user has no trips");
  const std::size_t n = trips.size();

  LabelState st;
  st.points.reserve(2 * n);
  PlaceLabeling out;
  out.user = trips.front().p_id;
  out.origin_pids.resize(n);
  out.dest_pids.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    out.origin_pids[i] = st.add(trips[i].origin, st.nearest_within(trips[i].origin, cfg.d_th_m));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const GeoPoint& d = trips[i].dest;
    if (cfg.strict_alg1_origin_first &&
        haversine_m(d, trips[i].origin) < cfg.d_th_m) {
      // own origin wins regardless of nearer neighbors; origins occupy
      // labeling slots 0..n-1
      out.dest_pids[i] = st.add(d, static_cast<int>(i));
      continue;
    }
    out.dest_pids[i] = st.add(d, st.nearest_within(d, cfg.d_th_m));
  }

  out.max_pid = st.max_pid;
  out.members.resize(st.max_pid + 1);
  for (std::size_t i = 0; i < st.points.size(); ++i) {
    out.members[st.pids[i]].push_back(st.points[i]);
  }
  out.labeled_points = std::move(st.points);
  out.match_edges = std::move(st.match_edges);
  return out;
}

namespace {

std::optional<PlaceSupport> best_supported(const std::vector<std::int64_t>& counts,
                                           std::size_t total_trips, double ratio_threshold,
                                           std::optional<int> excluded) {
  int best = -1;
  for (std::size_t pid = 0; pid < counts.size(); ++pid) {
    if (excluded && static_cast<int>(pid) == *excluded) continue;
    if (best < 0 || counts[pid] > counts[best]) best = static_cast<int>(pid);
  }
  if (best < 0 || counts[best] == 0) return std::nullopt;
  const double ratio = static_cast<double>(counts[best]) / static_cast<double>(total_trips);
  if (!(ratio > ratio_threshold)) return std::nullopt;
  return PlaceSupport{best, ratio};
}

}  // namespace

std::optional<PlaceSupport> detect_home(const PlaceLabeling& L,
                                        std::span<const TripRecord> trips,
                                        const MinerConfig& cfg) {
  if (trips.size() != L.origin_pids.size()) {
    throw DataError("detect_home: labeling does not match trips");
  }
  std::vector<std::int64_t> counts(L.place_count(), 0);
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const int oh = hour_of_day(trips[i].o_time, cfg.tz_offset_hours);
    const int dh = hour_of_day(trips[i].d_time, cfg.tz_offset_hours);
    if (hour_in_window(oh, cfg.morning_begin, cfg.morning_end)) ++counts[L.origin_pids[i]];
    if (hour_in_window(dh, cfg.evening_begin, cfg.evening_end)) ++counts[L.dest_pids[i]];
  }
  return best_supported(counts, trips.size(), cfg.home_work_ratio, std::nullopt);
}

std::optional<PlaceSupport> detect_work(const PlaceLabeling& L,
                                        std::span<const TripRecord> trips,
                                        const MinerConfig& cfg, std::optional<int> home_pid) {
  if (trips.size() != L.origin_pids.size()) {
    throw DataError("detect_work: labeling does not match trips");
  }
  std::vector<std::int64_t> counts(L.place_count(), 0);
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const int oh = hour_of_day(trips[i].o_time, cfg.tz_offset_hours);
    const int dh = hour_of_day(trips[i].d_time, cfg.tz_offset_hours);
    if (hour_in_window(dh, cfg.morning_begin, cfg.morning_end)) ++counts[L.dest_pids[i]];
    if (hour_in_window(oh, cfg.evening_begin, cfg.evening_end)) ++counts[L.origin_pids[i]];
  }
  return best_supported(counts, trips.size(), cfg.home_work_ratio, home_pid);
}

std::vector<RankedPlace> rank_places(const PlaceLabeling& L) {
  if (L.place_count() == 0) throw DataError("rank_places: empty labeling");
  std::vector<RankedPlace> out(L.place_count());
  for (int pid = 0; pid < L.place_count(); ++pid) out[pid].pid = pid;
  for (int pid : L.origin_pids) ++out[pid].visit_count;
  for (int pid : L.dest_pids) ++out[pid].visit_count;
  std::sort(out.begin(), out.end(), [](const RankedPlace& a, const RankedPlace& b) {
    if (a.visit_count != b.visit_count) return a.visit_count > b.visit_count;
    return a.pid < b.pid;
  });
  const double total = static_cast<double>(L.origin_pids.size() + L.dest_pids.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].rank = static_cast<int>(i) + 1;
    out[i].visit_probability = static_cast<double>(out[i].visit_count) / total;
  }
  return out;
}

GeoPoint place_centroid(const PlaceLabeling& L, int pid) {
  const auto& pts = L.members.at(pid);
  GeoPoint c;
  for (const auto& p : pts) {
    c.lng += p.lng;
    c.lat += p.lat;
  }
  c.lng /= static_cast<double>(pts.size());
  c.lat /= static_cast<double>(pts.size());
  return c;
}

std::vector<UserPlaces> mine_places(std::span<const TripRecord> records,
                                    const std::set<std::string>& users,
                                    const MinerConfig& cfg, bool parallel) {
  std::map<std::string, std::vector<TripRecord>> grouped;
  for (const auto& r : records) {
    if (users.count(r.p_id)) grouped[r.p_id].push_back(r);
  }
  std::vector<std::vector<TripRecord>> per_user;
  per_user.reserve(grouped.size());
  for (auto& [user, trips] : grouped) per_user.push_back(std::move(trips));

  const std::size_t n = per_user.size();
  std::vector<UserPlaces> out(n);
#pragma omp parallel for schedule(dynamic) if (parallel && n > 1)
  for (std::size_t i = 0; i < n; ++i) {
    auto& trips = per_user[i];
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
    out[i] = std::move(up);
  }
  return out;
}

}  // namespace mobmine
