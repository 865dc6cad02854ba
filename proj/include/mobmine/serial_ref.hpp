#pragma once

// Plain single-threaded reference implementations of the OpenMP kernels.
// They share the per-record / per-user primitives with the production code
// but run straight loops with a single accumulator; the test suite checks
// the parallel kernels against them, and the benchmark tool compares their
// runtime.

#include <array>
#include <set>
#include <span>

#include "mobmine/distributions.hpp"
#include "mobmine/places.hpp"
#include "mobmine/semantics.hpp"
#include "mobmine/synth.hpp"
#include "mobmine/trip.hpp"

namespace mobmine::serial_ref {

double log_likelihood(Family f, std::span<const double> params,
                      std::span<const double> data);

CleanResult clean(std::vector<TripRecord> records, const Region& region,
                  const CleanOptions& opt);

std::vector<UserPlaces> mine_places(std::span<const TripRecord> records,
                                    const std::set<std::string>& users,
                                    const MinerConfig& cfg);

std::array<GridDistanceMap, 2> grid_mean_distance(std::span<const ClassifiedTrip> trips,
                                                  const GridSpec& grid);

std::pair<std::vector<TripRecord>, GroundTruth> generate_population(const SynthSpec& spec,
                                                                    std::uint64_t seed);

}  // namespace mobmine::serial_ref
