#include "mobmine/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "mobmine/errors.hpp"
#include "mobmine/rng.hpp"
#include "mobmine/timeutil.hpp"

namespace mobmine {

namespace {

constexpr double kMetersPerDegLat = kEarthRadiusM * M_PI / 180.0;

GeoPoint offset_m(const GeoPoint& p, double dx_east, double dy_north) {
  return {p.lng + dx_east / (kMetersPerDegLat * std::cos(p.lat * M_PI / 180.0)),
          p.lat + dy_north / kMetersPerDegLat};
}

// uniform in a disc; the disc keeps the worst-case split/merge bound exact
GeoPoint jittered(const GeoPoint& center, double radius_m, Rng& rng) {
  const double ang = rng.uniform01() * 2.0 * M_PI;
  const double r = radius_m * std::sqrt(rng.uniform01());
  return offset_m(center, r * std::cos(ang), r * std::sin(ang));
}

int draw_weighted(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) return static_cast<int>(rng.uniform_int(0, weights.size() - 1));
  double u = rng.uniform01() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

struct MonthSlice {
  std::vector<std::int64_t> days;  // local day indices inside the window
};

std::vector<MonthSlice> window_months(const DateWindow& w) {
  std::vector<MonthSlice> out;
  int current_key = -1;
  for (std::int64_t day = w.start_day; day <= w.end_day; ++day) {
    const CivilDate c = civil_from_days(day);
    const int key = c.year * 12 + static_cast<int>(c.month) - 1;
    if (key != current_key) {
      out.emplace_back();
      current_key = key;
    }
    out.back().days.push_back(day);
  }
  return out;
}

struct UserOutput {
  std::vector<TripRecord> trips;
  TruthUser truth;
};

UserOutput generate_user(const SynthSpec& spec, std::uint64_t seed, int user_index,
                         const std::vector<MonthSlice>& months) {
  Rng rng(seed, static_cast<std::uint64_t>(user_index) + 1);
  UserOutput out;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u%06d", user_index);
  out.truth.p_id = buf;
  out.truth.commuter = rng.uniform01() < spec.commuter_fraction;

  const int n_places =
      static_cast<int>(rng.uniform_int(spec.places_per_user.min, spec.places_per_user.max));

  // plant centers with separation >= d_th + 2*jitter (+1 m of slack) and the
  // whole jitter disc inside the region
  const double min_sep = spec.d_th_m + 2.0 * spec.jitter_m + 1.0;
  const GeoPoint lo = spec.region.kind == Region::Kind::box
                          ? spec.region.coords[0]
                          : [&] {
                              GeoPoint m{181, 91};
                              for (const auto& p : spec.region.coords) {
                                m.lng = std::min(m.lng, p.lng);
                                m.lat = std::min(m.lat, p.lat);
                              }
                              return m;
                            }();
  const GeoPoint hi = spec.region.kind == Region::Kind::box
                          ? spec.region.coords[1]
                          : [&] {
                              GeoPoint m{-181, -91};
                              for (const auto& p : spec.region.coords) {
                                m.lng = std::max(m.lng, p.lng);
                                m.lat = std::max(m.lat, p.lat);
                              }
                              return m;
                            }();
  int attempts = 0;
  while (static_cast<int>(out.truth.places.size()) < n_places) {
    if (++attempts > 20000) {
      throw DataError("synth: cannot place centers at the required separation inside the region");
    }
    GeoPoint cand{lo.lng + rng.uniform01() * (hi.lng - lo.lng),
                  lo.lat + rng.uniform01() * (hi.lat - lo.lat)};
    bool ok = in_region(cand, spec.region);
    for (int k = 0; ok && k < 8; ++k) {
      const double a = k * M_PI / 4.0;
      ok = in_region(offset_m(cand, spec.jitter_m * std::cos(a), spec.jitter_m * std::sin(a)),
                     spec.region);
    }
    for (std::size_t i = 0; ok && i < out.truth.places.size(); ++i) {
      ok = haversine_m(cand, out.truth.places[i]) >= min_sep;
    }
    if (ok) out.truth.places.push_back(cand);
  }
  if (out.truth.commuter) {
    out.truth.home = out.truth.places[0];
    out.truth.work = out.truth.places[1];
  }

  const int trips_per_month =
      static_cast<int>(rng.uniform_int(spec.trips_per_month.min, spec.trips_per_month.max));
  const int n_trips = trips_per_month * static_cast<int>(months.size());

  // exact class counts; reserve enough non-commuting trips to visit every
  // planted place at least once
  int n_commuting = 0;
  std::vector<bool> uncovered(n_places, true);
  if (out.truth.commuter) {
    const double q = std::min(0.95, spec.home_trip_ratio + 0.15);
    n_commuting = static_cast<int>(std::lround(q * n_trips));
    const int others = n_places - 2;
    if (others <= 0) {
      n_commuting = n_trips;
    } else {
      const int reserve_nc = (others + 1) / 2;
      n_commuting = std::clamp(n_commuting, 1, n_trips - reserve_nc);
    }
    if (n_commuting >= 1) uncovered[0] = uncovered[1] = false;  // any commute covers both
  }
  std::vector<char> is_commute(n_trips, 0);
  std::fill(is_commute.begin(), is_commute.begin() + n_commuting, 1);
  for (int i = n_trips - 1; i > 0; --i) {
    std::swap(is_commute[i], is_commute[rng.uniform_int(0, i)]);
  }

  auto pair_is_home_work = [&](int a, int b) {
    return out.truth.commuter && ((a == 0 && b == 1) || (a == 1 && b == 0));
  };
  auto first_uncovered = [&](int exclude) {
    for (int i = 0; i < n_places; ++i) {
      if (uncovered[i] && i != exclude) return i;
    }
    return -1;
  };

  int trip_seq = 0;
  for (std::size_t mi = 0; mi < months.size(); ++mi) {
    const MonthSlice& month = months[mi];
    for (int t = 0; t < trips_per_month; ++t, ++trip_seq) {
      const bool commute = is_commute[trip_seq] != 0;
      const TripClass cls = commute ? TripClass::commuting : TripClass::non_commuting;
      const auto& profile =
          commute ? spec.profile_commuting : spec.profile_non_commuting;
      const int hour = draw_weighted(rng, profile);

      int o_idx, d_idx;
      if (commute) {
        const bool morning = hour < 13;
        o_idx = morning ? 0 : 1;
        d_idx = morning ? 1 : 0;
      } else {
        o_idx = first_uncovered(-1);
        if (o_idx >= 0) {
          d_idx = first_uncovered(o_idx);
          if (d_idx < 0 || pair_is_home_work(o_idx, d_idx)) {
            d_idx = -1;
            for (int tries = 0; tries < 200 && d_idx < 0; ++tries) {
              const int cand = static_cast<int>(rng.uniform_int(0, n_places - 1));
              if (cand != o_idx && !pair_is_home_work(o_idx, cand)) d_idx = cand;
            }
            if (d_idx < 0) d_idx = (o_idx + 2) % n_places;
          }
        } else {
          o_idx = static_cast<int>(rng.uniform_int(0, n_places - 1));
          d_idx = -1;
          for (int tries = 0; tries < 200 && d_idx < 0; ++tries) {
            const int cand = static_cast<int>(rng.uniform_int(0, n_places - 1));
            if (cand != o_idx && !pair_is_home_work(o_idx, cand)) d_idx = cand;
          }
          if (d_idx < 0) {
            d_idx = (o_idx + 2) % n_places;
            if (pair_is_home_work(o_idx, d_idx) || d_idx == o_idx) d_idx = (o_idx + 3) % n_places;
          }
        }
        uncovered[o_idx] = false;
        uncovered[d_idx] = false;
      }

      // weekday/weekend modulation via per-day weights within the month
      const double weekend_factor = commute ? spec.weekend_commuting_factor
                                            : spec.weekend_non_commuting_factor;
      std::vector<double> day_weights(month.days.size());
      for (std::size_t i = 0; i < month.days.size(); ++i) {
        const int wd = weekday_of_day(month.days[i]);
        day_weights[i] = (wd == 0 || wd == 6) ? weekend_factor : 1.0;
      }
      const std::int64_t day = month.days[draw_weighted(rng, day_weights)];

      TripRecord r;
      std::snprintf(buf, sizeof(buf), "r%06d_%05d", user_index, trip_seq);
      r.r_id = buf;
      r.p_id = out.truth.p_id;
      std::snprintf(buf, sizeof(buf), "d%06lld",
                    static_cast<long long>(rng.uniform_int(0, 999999)));
      r.d_id = buf;
      r.o_time = day * 86400 + hour * 3600 + rng.uniform_int(0, 3599) -
                 static_cast<std::int64_t>(spec.tz_offset_hours) * 3600;

      const auto& dist_model = spec.distance_model[static_cast<int>(cls)];
      const auto& dur_model = spec.duration_model[static_cast<int>(cls)];
      do {
        r.distance_km = sample_one(dist_model.family, dist_model.params, rng);
      } while (!(r.distance_km > 0.0) || !std::isfinite(r.distance_km));

      // resample duration until the mean speed respects the cleaning cap
      std::int64_t duration_s = 0;
      bool ok = false;
      for (int tries = 0; tries < 1000 && !ok; ++tries) {
        const double dur_min = sample_one(dur_model.family, dur_model.params, rng);
        if (!(dur_min > 0.0) || !std::isfinite(dur_min)) continue;
        duration_s = std::max<std::int64_t>(1, std::llround(dur_min * 60.0));
        ok = r.distance_km * 3600.0 <= 120.0 * static_cast<double>(duration_s);
      }
      if (!ok) {
        throw DataError("synth: cannot satisfy the speed cap with the configured models");
      }
      r.d_time = r.o_time + duration_s;

      const GeoPoint& oc = out.truth.places[o_idx];
      const GeoPoint& dc = out.truth.places[d_idx];
      GeoPoint op, dp;
      int tries = 0;
      do {
        op = jittered(oc, spec.jitter_m, rng);
      } while (!in_region(op, spec.region) && ++tries < 1000);
      tries = 0;
      do {
        dp = jittered(dc, spec.jitter_m, rng);
      } while (!in_region(dp, spec.region) && ++tries < 1000);
      if (!in_region(op, spec.region) || !in_region(dp, spec.region)) {
        throw DataError("synth: jittered endpoint cannot stay inside the region");
      }
      r.origin = op;
      r.dest = dp;

      out.truth.trip_classes[r.r_id] = cls;
      out.trips.push_back(std::move(r));
    }
  }

  std::sort(out.trips.begin(), out.trips.end(), [](const TripRecord& a, const TripRecord& b) {
    if (a.o_time != b.o_time) return a.o_time < b.o_time;
    return a.r_id < b.r_id;
  });
  return out;
}

std::array<double, 24> default_commuting_profile() {
  std::array<double, 24> p{};
  p[6] = 0.8;
  p[7] = 2.2;
  p[8] = 3.0;
  p[9] = 1.6;
  p[10] = 0.8;
  p[15] = 0.5;
  p[16] = 0.8;
  p[17] = 2.0;
  p[18] = 2.6;
  p[19] = 2.2;
  p[20] = 1.4;
  p[21] = 0.7;
  return p;
}

std::array<double, 24> default_non_commuting_profile() {
  return {0.25, 0.12, 0.06, 0.05, 0.05, 0.10, 0.30, 0.60, 0.90, 1.10, 1.30, 1.50,
          1.70, 1.60, 1.50, 1.60, 1.80, 2.20, 2.60, 2.40, 2.00, 1.60, 1.00, 0.50};
}

}  // namespace

SynthSpec default_synth_spec() {
  SynthSpec s;
  s.window.start_day = days_from_civil(2017, 3, 1);
  s.window.end_day = days_from_civil(2017, 6, 30);
  s.profile_commuting = default_commuting_profile();
  s.profile_non_commuting = default_non_commuting_profile();
  const int com = static_cast<int>(TripClass::commuting);
  const int non = static_cast<int>(TripClass::non_commuting);
  s.distance_model[com] = {Family::log_normal, {1.52, 0.61}};
  s.distance_model[non] = {Family::log_normal, {1.85, 0.75}};
  s.duration_model[com] = {Family::log_normal, {3.05, 0.45}};
  s.duration_model[non] = {Family::log_normal, {3.16, 0.52}};
  return s;
}

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.n_users < 0) throw DataError("synth spec: n_users must be >= 0");
  if (spec.window.start_day > spec.window.end_day) {
    throw DataError("synth spec: window start after end");
  }
  if (!(spec.commuter_fraction >= 0.0 && spec.commuter_fraction <= 1.0)) {
    throw DataError("synth spec: commuter_fraction must be in [0,1]");
  }
  if (!(spec.home_trip_ratio > 0.0 && spec.home_trip_ratio < 1.0)) {
    throw DataError("synth spec: home_trip_ratio must be in (0,1)");
  }
  if (!(spec.jitter_m > 0.0) || !(spec.jitter_m < spec.d_th_m / 2.0)) {
    throw DataError("synth spec: jitter_m must be in (0, d_th/2)");
  }
  if (spec.trips_per_month.min < 1 || spec.trips_per_month.max < spec.trips_per_month.min) {
    throw DataError("synth spec: bad trips_per_month range");
  }
  if (spec.places_per_user.min < 2 || spec.places_per_user.max < spec.places_per_user.min) {
    throw DataError("synth spec: places_per_user needs min >= 2");
  }
  for (double w : spec.profile_commuting) {
    if (w < 0.0) throw DataError("synth spec: negative profile weight");
  }
  for (double w : spec.profile_non_commuting) {
    if (w < 0.0) throw DataError("synth spec: negative profile weight");
  }
  for (const auto& m : spec.distance_model) check_params(m.family, m.params);
  for (const auto& m : spec.duration_model) check_params(m.family, m.params);
  validate_region(spec.region);
  validate_grid(spec.grid);
  // coverage needs at least ceil(P/2) trips per user
  const int min_trips =
      spec.trips_per_month.min *
      static_cast<int>(window_months(spec.window).size());
  if (min_trips < (spec.places_per_user.max + 1) / 2) {
    throw DataError("synth spec: too few trips to visit every planted place");
  }
}

std::pair<std::vector<TripRecord>, GroundTruth> generate_population(const SynthSpec& spec,
                                                                    std::uint64_t seed,
                                                                    bool parallel) {
  validate_synth_spec(spec);
  const std::vector<MonthSlice> months = window_months(spec.window);
  GroundTruth truth;
  truth.seed = seed;
  truth.users.resize(spec.n_users);
  std::vector<std::vector<TripRecord>> trips(spec.n_users);

  bool failed = false;
  std::string failure;
#pragma omp parallel for schedule(dynamic) if (parallel && spec.n_users > 1)
  for (int u = 0; u < spec.n_users; ++u) {
    try {
      UserOutput out = generate_user(spec, seed, u, months);
      trips[u] = std::move(out.trips);
      truth.users[u] = std::move(out.truth);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        failure = e.what();
      }
    }
  }
  if (failed) throw DataError("synth: " + failure);

  std::vector<TripRecord> all;
  std::size_t total = 0;
  for (const auto& t : trips) total += t.size();
  all.reserve(total);
  for (auto& t : trips) {
    all.insert(all.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  std::sort(all.begin(), all.end(), [](const TripRecord& a, const TripRecord& b) {
    if (a.o_time != b.o_time) return a.o_time < b.o_time;
    return a.r_id < b.r_id;
  });
  return {std::move(all), std::move(truth)};
}

// ---- JSON -------------------------------------------------------------

namespace {

nlohmann::json region_to_json(const Region& r) {
  nlohmann::json j;
  j["kind"] = r.kind == Region::Kind::box ? "box" : "polygon";
  auto& coords = j["coords"] = nlohmann::json::array();
  for (const auto& p : r.coords) coords.push_back({p.lng, p.lat});
  return j;
}

nlohmann::json model_to_json(const DistributionSpec& m) {
  return {{"family", std::string(family_name(m.family))}, {"params", m.params}};
}

DistributionSpec model_from_json(const nlohmann::json& j) {
  DistributionSpec m;
  const auto fam = family_from_name(j.at("family").get<std::string>());
  if (!fam) throw DataError("synth spec: unknown family " + j.at("family").get<std::string>());
  m.family = *fam;
  m.params = j.at("params").get<std::vector<double>>();
  return m;
}

}  // namespace

std::string synth_spec_to_json_text(const SynthSpec& s) {
  nlohmann::json j;
  j["n_users"] = s.n_users;
  j["window"] = {{"start", format_date(s.window.start_day)},
                 {"end", format_date(s.window.end_day)}};
  j["region"] = region_to_json(s.region);
  j["grid"] = {{"bounds", {s.grid.min_lng, s.grid.min_lat, s.grid.max_lng, s.grid.max_lat}},
               {"n_cols", s.grid.n_cols},
               {"n_rows", s.grid.n_rows}};
  j["commuter_fraction"] = s.commuter_fraction;
  j["trips_per_month"] = {{"min", s.trips_per_month.min}, {"max", s.trips_per_month.max}};
  j["places_per_user"] = {{"min", s.places_per_user.min}, {"max", s.places_per_user.max}};
  j["home_trip_ratio"] = s.home_trip_ratio;
  j["hourly_profiles"] = {{"commuting", s.profile_commuting},
                          {"non_commuting", s.profile_non_commuting}};
  j["distance_model"] = {
      {"commuting", model_to_json(s.distance_model[0])},
      {"non_commuting", model_to_json(s.distance_model[1])}};
  j["duration_model"] = {
      {"commuting", model_to_json(s.duration_model[0])},
      {"non_commuting", model_to_json(s.duration_model[1])}};
  j["jitter_m"] = s.jitter_m;
  j["d_th_m"] = s.d_th_m;
  j["weekend_commuting_factor"] = s.weekend_commuting_factor;
  j["weekend_non_commuting_factor"] = s.weekend_non_commuting_factor;
  j["tz_offset_hours"] = s.tz_offset_hours;
  return j.dump(2) + "\n";
}

SynthSpec synth_spec_from_json_text(const std::string& text) {
  SynthSpec s = default_synth_spec();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    s.n_users = j.value("n_users", s.n_users);
    if (j.contains("window")) {
      const auto start = parse_date(j.at("window").at("start").get<std::string>());
      const auto end = parse_date(j.at("window").at("end").get<std::string>());
      if (!start || !end) throw DataError("synth spec: bad window dates");
      s.window = {*start, *end};
    }
    if (j.contains("region")) {
      const GeoConfig gc = parse_geo_config(nlohmann::json{{"region", j.at("region")}}.dump());
      s.region = gc.region;
    }
    if (j.contains("grid")) {
      const GeoConfig gc = parse_geo_config(nlohmann::json{{"grid", j.at("grid")}}.dump());
      s.grid = gc.grid;
    }
    s.commuter_fraction = j.value("commuter_fraction", s.commuter_fraction);
    if (j.contains("trips_per_month")) {
      s.trips_per_month = {j.at("trips_per_month").at("min").get<int>(),
                           j.at("trips_per_month").at("max").get<int>()};
    }
    if (j.contains("places_per_user")) {
      s.places_per_user = {j.at("places_per_user").at("min").get<int>(),
                           j.at("places_per_user").at("max").get<int>()};
    }
    s.home_trip_ratio = j.value("home_trip_ratio", s.home_trip_ratio);
    if (j.contains("hourly_profiles")) {
      const auto& hp = j.at("hourly_profiles");
      if (hp.contains("commuting")) {
        s.profile_commuting = hp.at("commuting").get<std::array<double, 24>>();
      }
      if (hp.contains("non_commuting")) {
        s.profile_non_commuting = hp.at("non_commuting").get<std::array<double, 24>>();
      }
    }
    if (j.contains("distance_model")) {
      s.distance_model[0] = model_from_json(j.at("distance_model").at("commuting"));
      s.distance_model[1] = model_from_json(j.at("distance_model").at("non_commuting"));
    }
    if (j.contains("duration_model")) {
      s.duration_model[0] = model_from_json(j.at("duration_model").at("commuting"));
      s.duration_model[1] = model_from_json(j.at("duration_model").at("non_commuting"));
    }
    s.jitter_m = j.value("jitter_m", s.jitter_m);
    s.d_th_m = j.value("d_th_m", s.d_th_m);
    s.weekend_commuting_factor = j.value("weekend_commuting_factor", s.weekend_commuting_factor);
    s.weekend_non_commuting_factor =
        j.value("weekend_non_commuting_factor", s.weekend_non_commuting_factor);
    s.tz_offset_hours = j.value("tz_offset_hours", s.tz_offset_hours);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad synth spec JSON: ") + e.what());
  }
  validate_synth_spec(s);
  return s;
}

SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open synth spec: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return synth_spec_from_json_text(text);
}

std::string truth_to_json_text(const GroundTruth& truth) {
  nlohmann::json j;
  j["seed"] = truth.seed;
  auto& users = j["users"] = nlohmann::json::array();
  for (const auto& u : truth.users) {
    nlohmann::json ju;
    ju["p_id"] = u.p_id;
    ju["commuter"] = u.commuter;
    if (u.commuter) {
      ju["home"] = {u.home.lng, u.home.lat};
      ju["work"] = {u.work.lng, u.work.lat};
    }
    auto& places = ju["places"] = nlohmann::json::array();
    for (const auto& p : u.places) places.push_back({p.lng, p.lat});
    nlohmann::json classes;
    for (const auto& [rid, cls] : u.trip_classes) classes[rid] = trip_class_name(cls);
    ju["trip_classes"] = std::move(classes);
    users.push_back(std::move(ju));
  }
  return j.dump(2) + "\n";
}

GroundTruth truth_from_json_text(const std::string& text) {
  GroundTruth truth;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    truth.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& ju : j.at("users")) {
      TruthUser u;
      u.p_id = ju.at("p_id").get<std::string>();
      u.commuter = ju.at("commuter").get<bool>();
      if (u.commuter) {
        u.home = {ju.at("home").at(0).get<double>(), ju.at("home").at(1).get<double>()};
        u.work = {ju.at("work").at(0).get<double>(), ju.at("work").at(1).get<double>()};
      }
      for (const auto& p : ju.at("places")) {
        u.places.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      }
      for (const auto& [rid, cls] : ju.at("trip_classes").items()) {
        u.trip_classes[rid] = cls.get<std::string>() == "commuting"
                                  ? TripClass::commuting
                                  : TripClass::non_commuting;
      }
      truth.users.push_back(std::move(u));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad ground truth JSON: ") + e.what());
  }
  return truth;
}

}  // namespace mobmine
