#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mobmine/distributions.hpp"
#include "mobmine/geo.hpp"
#include "mobmine/semantics.hpp"
#include "mobmine/trip.hpp"

namespace mobmine {

struct DistributionSpec {
  Family family = Family::log_normal;
  std::vector<double> params;
};

struct CountRange {
  int min = 0;
  int max = 0;  // inclusive
};

// Scenario for the synthetic population. Planted places are pairwise at
// least d_th + 2*jitter + 1 m apart and jitter stays below d_th/2, so the
// place miner can neither merge nor split them; that is what makes the
// planted truth recoverable.
struct SynthSpec {
  int n_users = 500;
  DateWindow window;  // defaults to 2017-03-01 .. 2017-06-30
  Region region;
  GridSpec grid;
  double commuter_fraction = 0.7;
  CountRange trips_per_month{11, 18};
  CountRange places_per_user{8, 12};
  double home_trip_ratio = 0.5;  // expected share of peak-window home trips
  std::array<double, 24> profile_commuting{};
  std::array<double, 24> profile_non_commuting{};
  std::array<DistributionSpec, 2> distance_model;  // indexed by TripClass
  std::array<DistributionSpec, 2> duration_model;  // minutes
  double jitter_m = 100.0;
  double d_th_m = 500.0;
  double weekend_commuting_factor = 0.1;
  double weekend_non_commuting_factor = 1.0;
  int tz_offset_hours = 8;
};

SynthSpec default_synth_spec();
void validate_synth_spec(const SynthSpec& spec);

SynthSpec synth_spec_from_json_text(const std::string& text);
SynthSpec load_synth_spec(const std::string& path);
std::string synth_spec_to_json_text(const SynthSpec& spec);

struct TruthUser {
  std::string p_id;
  bool commuter = false;
  GeoPoint home;  // commuters only
  GeoPoint work;
  std::vector<GeoPoint> places;
  std::map<std::string, TripClass> trip_classes;  // by r_id
};

struct GroundTruth {
  std::uint64_t seed = 0;
  std::vector<TruthUser> users;
};

// Deterministic for a given seed; per-user sub-streams make the parallel
// path reproduce the sequential output exactly. Records come back sorted by
// (o_time, r_id). Throws DataError when the scenario is infeasible (for
// example centers cannot reach the required separation inside the region).
std::pair<std::vector<TripRecord>, GroundTruth> generate_population(const SynthSpec& spec,
                                                                    std::uint64_t seed,
                                                                    bool parallel = true);

std::string truth_to_json_text(const GroundTruth& truth);
GroundTruth truth_from_json_text(const std::string& text);

}  // namespace mobmine
