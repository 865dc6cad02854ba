#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mobmine/geo.hpp"
#include "mobmine/trip.hpp"

namespace mobmine {

struct MinerConfig {
  double d_th_m = 500.0;         // same-place distance threshold
  double home_work_ratio = 0.40; // strict ">" on the largest count ratio
  int morning_begin = 6, morning_end = 11;  // half-open hour windows
  int evening_begin = 15, evening_end = 20;
  // a destination first checks its own trip's origin, even when a previously
  // labeled point is nearer
  bool strict_alg1_origin_first = true;
  int tz_offset_hours = 8;
};

// Endpoint labeling of one user's trips. Labeling order is all origins in
// trip order, then all destinations in trip order; labeled_points/match_edges
// record that order for diagnostics (match_edges[i] is the index of the
// previously labeled point that point i matched, -1 when it opened a place).
struct PlaceLabeling {
  std::string user;
  std::vector<int> origin_pids;
  std::vector<int> dest_pids;
  int max_pid = -1;
  std::vector<std::vector<GeoPoint>> members;  // pid -> points, labeling order
  std::vector<GeoPoint> labeled_points;
  std::vector<int> match_edges;

  int place_count() const { return max_pid + 1; }
};

// PID plus the count ratio that justified a home/work assignment.
struct PlaceSupport {
  int pid = -1;
  double ratio = 0.0;
};

// Greedy distance-based labeling: a point strictly within d_th of a
// previously labeled point joins the nearest one (ties to the lowest PID);
// otherwise it opens PID max_pid+1. Trips must belong to one user, sorted by
// start time. Throws DataError on an empty sequence.
PlaceLabeling generate_places(std::span<const TripRecord> user_trips,
                              const MinerConfig& cfg);

// Largest count of morning-window origins plus evening-window destinations;
// a home only when the ratio to the user's total trips strictly exceeds
// home_work_ratio.
std::optional<PlaceSupport> detect_home(const PlaceLabeling& labeling,
                                        std::span<const TripRecord> trips,
                                        const MinerConfig& cfg);

// Mirror image (morning destinations + evening origins), with the home PID
// excluded from candidacy.
std::optional<PlaceSupport> detect_work(const PlaceLabeling& labeling,
                                        std::span<const TripRecord> trips,
                                        const MinerConfig& cfg,
                                        std::optional<int> home_pid);

struct RankedPlace {
  int rank = 0;  // 1 = most visited
  int pid = 0;
  std::int64_t visit_count = 0;
  double visit_probability = 0.0;
};

// Endpoint counts per PID, sorted descending (ties to the lowest PID);
// probabilities sum to 1.
std::vector<RankedPlace> rank_places(const PlaceLabeling& labeling);

GeoPoint place_centroid(const PlaceLabeling& labeling, int pid);

struct UserPlaces {
  PlaceLabeling labeling;
  std::optional<PlaceSupport> home;
  std::optional<PlaceSupport> work;
  std::vector<TripRecord> trips;  // the user's trips, time order
};

// Groups records by user, keeps only `users`, sorts each user's trips by
// (o_time, r_id) and mines places. Users are independent, so the loop runs
// in parallel; output is ordered by p_id.
std::vector<UserPlaces> mine_places(std::span<const TripRecord> records,
                                    const std::set<std::string>& users,
                                    const MinerConfig& cfg, bool parallel = true);

}  // namespace mobmine
