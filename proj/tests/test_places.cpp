#include <cmath>
#include <functional>
#include <numeric>

#include "doctest.h"
#include "mobmine/errors.hpp"
#include "mobmine/places.hpp"
#include "mobmine/rng.hpp"
#include "mobmine/serial_ref.hpp"
#include "mobmine/timeutil.hpp"
#include "support/oracles.hpp"

using namespace mobmine;

namespace {

const GeoPoint kBase{116.40, 39.90};

GeoPoint east_north(double dx_m, double dy_m) {
  const double m_per_deg = 6371000.0 * M_PI / 180.0;
  return {kBase.lng + dx_m / (m_per_deg * std::cos(kBase.lat * M_PI / 180.0)),
          kBase.lat + dy_m / m_per_deg};
}

TripRecord trip(const std::string& rid, GeoPoint o, GeoPoint d, int o_hour = 12,
                int d_hour = 12, int day = 0) {
  TripRecord r;
  r.r_id = rid;
  r.p_id = "u";
  r.d_id = "drv";
  r.origin = o;
  r.dest = d;
  // hours are local (UTC+8)
  r.o_time = (17226 + day) * 86400 + o_hour * 3600 - 8 * 3600;
  r.d_time = (17226 + day) * 86400 + d_hour * 3600 + 600 - 8 * 3600;
  r.distance_km = 3.0;
  return r;
}

// replay the labeling through the quadratic matrix-based oracle
void check_against_oracle(std::span<const TripRecord> trips, const MinerConfig& cfg) {
  const PlaceLabeling got = generate_places(trips, cfg);
  std::vector<GeoPoint> points;
  std::vector<int> origin_of;
  for (const auto& t : trips) {
    points.push_back(t.origin);
    origin_of.push_back(-1);
  }
  for (std::size_t i = 0; i < trips.size(); ++i) {
    points.push_back(trips[i].dest);
    origin_of.push_back(static_cast<int>(i));
  }
  const oracle::GreedyLabels want =
      oracle::dbvpga_greedy(points, origin_of, cfg.d_th_m, cfg.strict_alg1_origin_first);
  REQUIRE(got.max_pid == want.max_pid);
  for (std::size_t i = 0; i < trips.size(); ++i) {
    CHECK(got.origin_pids[i] == want.pids[i]);
    CHECK(got.dest_pids[i] == want.pids[trips.size() + i]);
  }
}

std::vector<TripRecord> random_user(Rng& rng, int max_trips = 30) {
  const int n_centers = static_cast<int>(rng.uniform_int(2, 8));
  std::vector<GeoPoint> centers;
  for (int i = 0; i < n_centers; ++i) {
    centers.push_back(east_north(rng.uniform01() * 6000.0, rng.uniform01() * 6000.0));
  }
  const int n = static_cast<int>(rng.uniform_int(1, max_trips));
  std::vector<TripRecord> trips;
  for (int i = 0; i < n; ++i) {
    auto scatter = [&](const GeoPoint& c) {
      // up to 350 m so places overlap and chain across the 500 m rule
      return east_north((c.lng - kBase.lng) * 111194.93 * std::cos(kBase.lat * M_PI / 180.0) +
                            (rng.uniform01() - 0.5) * 700.0,
                        (c.lat - kBase.lat) * 111194.93 + (rng.uniform01() - 0.5) * 700.0);
    };
    const auto& oc = centers[rng.uniform_int(0, n_centers - 1)];
    const auto& dc = centers[rng.uniform_int(0, n_centers - 1)];
    trips.push_back(trip("r" + std::to_string(i), scatter(oc), scatter(dc),
                         static_cast<int>(rng.uniform_int(0, 23)),
                         static_cast<int>(rng.uniform_int(0, 23)),
                         static_cast<int>(rng.uniform_int(0, 60))));
  }
  return trips;
}

}  // namespace

TEST_CASE("single trip below and above the threshold") {
  MinerConfig cfg;
  {
    const std::vector<TripRecord> t{trip("r0", east_north(0, 0), east_north(300, 0))};
    const PlaceLabeling L = generate_places(t, cfg);
    CHECK(L.origin_pids[0] == 0);
    CHECK(L.dest_pids[0] == 0);
    CHECK(L.max_pid == 0);
  }
  {
    const std::vector<TripRecord> t{trip("r0", east_north(0, 0), east_north(600, 0))};
    const PlaceLabeling L = generate_places(t, cfg);
    CHECK(L.origin_pids[0] == 0);
    CHECK(L.dest_pids[0] == 1);
    CHECK(L.max_pid == 1);
  }
  CHECK_THROWS_AS(generate_places(std::vector<TripRecord>{}, cfg), DataError);
}

TEST_CASE("chaining through an intermediate point") {
  // A, B, C labeled in that order; d(A,B)=400, d(B,C)=400, d(A,C)=700
  MinerConfig cfg;
  const GeoPoint a = east_north(0, 0);
  const GeoPoint b = east_north(400, 0);
  const GeoPoint c = east_north(612.5, 338.9);
  const std::vector<TripRecord> trips{trip("r0", a, c), trip("r1", b, east_north(5000, 5000))};
  REQUIRE(haversine_m(a, b) == doctest::Approx(400).epsilon(0.01));
  REQUIRE(haversine_m(b, c) == doctest::Approx(400).epsilon(0.01));
  REQUIRE(haversine_m(a, c) == doctest::Approx(700).epsilon(0.01));
  const PlaceLabeling L = generate_places(trips, cfg);
  CHECK(L.origin_pids[0] == 0);  // A
  CHECK(L.origin_pids[1] == 0);  // B joins A
  CHECK(L.dest_pids[0] == 0);    // C chains through B
  check_against_oracle(trips, cfg);
}

TEST_CASE("nearest labeled point wins") {
  MinerConfig cfg;
  // origins 900 m apart form places 0 and 1; t1's dest lands 600 m from its
  // own origin and 300 m from origin 2
  const std::vector<TripRecord> trips{
      trip("r0", east_north(0, 0), east_north(600, 0)),
      trip("r1", east_north(900, 0), east_north(3000, 0)),
  };
  const PlaceLabeling L = generate_places(trips, cfg);
  CHECK(L.origin_pids[0] == 0);
  CHECK(L.origin_pids[1] == 1);
  CHECK(L.dest_pids[0] == 1);  // 300 m beats 600 m
  CHECK(L.dest_pids[1] == 2);
  check_against_oracle(trips, cfg);
}

TEST_CASE("distance ties break to the lowest pid") {
  MinerConfig cfg;
  cfg.strict_alg1_origin_first = false;
  // origins at -400 and +400 around the dest point, exactly equidistant
  const std::vector<TripRecord> trips{
      trip("r0", east_north(-400, 0), east_north(0, 20000)),
      trip("r1", east_north(400, 0), east_north(0, 0)),
  };
  const PlaceLabeling L = generate_places(trips, cfg);
  REQUIRE(haversine_m(trips[1].dest, trips[0].origin) ==
          haversine_m(trips[1].dest, trips[1].origin));
  CHECK(L.origin_pids[0] == 0);
  CHECK(L.origin_pids[1] == 1);
  CHECK(L.dest_pids[1] == 0);  // tie -> pid 0
  check_against_oracle(trips, cfg);
}

TEST_CASE("own-origin precedence beats a nearer point when strict") {
  // origins A=0 and C=700 (places 0/1); t2's dest D sits 320 m from A but
  // 380 m from its own origin C
  const std::vector<TripRecord> trips{
      trip("r0", east_north(0, 0), east_north(5000, 0)),
      trip("r1", east_north(700, 0), east_north(320, 0)),
  };
  MinerConfig strict;
  const PlaceLabeling with_strict = generate_places(trips, strict);
  CHECK(with_strict.dest_pids[1] == 1);

  MinerConfig lax;
  lax.strict_alg1_origin_first = false;
  const PlaceLabeling without = generate_places(trips, lax);
  CHECK(without.dest_pids[1] == 0);

  check_against_oracle(trips, strict);
  check_against_oracle(trips, lax);
}

TEST_CASE("generate_places matches the greedy oracle on random users") {
  MinerConfig cfg;
  Rng rng(606);
  for (int rep = 0; rep < 300; ++rep) {
    const auto trips = random_user(rng);
    check_against_oracle(trips, cfg);
  }
  MinerConfig lax;
  lax.strict_alg1_origin_first = false;
  Rng rng2(607);
  for (int rep = 0; rep < 100; ++rep) {
    const auto trips = random_user(rng2);
    check_against_oracle(trips, lax);
  }
}

TEST_CASE("labeling invariants on random users") {
  MinerConfig cfg;
  Rng rng(707);
  for (int rep = 0; rep < 120; ++rep) {
    const auto trips = random_user(rng);
    const PlaceLabeling L = generate_places(trips, cfg);

    // determinism
    const PlaceLabeling L2 = generate_places(trips, cfg);
    CHECK(L.origin_pids == L2.origin_pids);
    CHECK(L.dest_pids == L2.dest_pids);

    // pid bounds and structure
    CHECK(L.max_pid + 1 <= 2 * static_cast<int>(trips.size()));
    CHECK(L.origin_pids[0] == 0);
    std::int64_t member_total = 0;
    for (const auto& m : L.members) {
      CHECK(!m.empty());
      member_total += static_cast<std::int64_t>(m.size());
    }
    CHECK(member_total == static_cast<std::int64_t>(2 * trips.size()));

    // match edges: every taken edge is shorter than d_th; union-find over
    // them reproduces the pid partition exactly
    const std::size_t n_pts = L.labeled_points.size();
    std::vector<std::size_t> parent(n_pts);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
      return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    std::vector<int> pid_of(n_pts);
    for (std::size_t i = 0; i < n_pts; ++i) {
      pid_of[i] = i < trips.size() ? L.origin_pids[i] : L.dest_pids[i - trips.size()];
      const int e = L.match_edges[i];
      if (e >= 0) {
        CHECK(haversine_m(L.labeled_points[i], L.labeled_points[e]) < cfg.d_th_m);
        parent[find(i)] = find(static_cast<std::size_t>(e));
      } else {
        // opening a new place means nothing labeled earlier was in reach
        for (std::size_t j = 0; j < i; ++j) {
          CHECK(haversine_m(L.labeled_points[i], L.labeled_points[j]) >= cfg.d_th_m);
        }
      }
    }
    for (std::size_t i = 0; i < n_pts; ++i) {
      for (std::size_t j = i + 1; j < n_pts; ++j) {
        CHECK((pid_of[i] == pid_of[j]) == (find(i) == find(j)));
      }
    }
  }
}

TEST_CASE("detect_home picks the supported morning/evening place") {
  MinerConfig cfg;
  std::vector<TripRecord> trips;
  // three noon trips from separated places (pids 0,1,2), then five morning
  // trips from H (pid 3), then two noon trips from H; dests all far away,
  // arriving outside the evening window
  const GeoPoint h = east_north(0, 9000);
  int rid = 0;
  for (int i = 0; i < 3; ++i) {
    trips.push_back(trip("r" + std::to_string(rid++), east_north(i * 2000.0, 0),
                         east_north(i * 2000.0 + 600, 3000), 12, 12, i));
  }
  for (int i = 0; i < 5; ++i) {
    trips.push_back(trip("r" + std::to_string(rid++), h, east_north(i * 2000.0, 20000), 8, 9,
                         10 + i));
  }
  for (int i = 0; i < 2; ++i) {
    trips.push_back(trip("r" + std::to_string(rid++), h, east_north(i * 2000.0, 30000), 13, 13,
                         20 + i));
  }
  const PlaceLabeling L = generate_places(trips, cfg);
  const auto home = detect_home(L, trips, cfg);
  REQUIRE(home.has_value());
  CHECK(home->pid == 3);
  CHECK(home->ratio == doctest::Approx(0.5));

  // exactly 40% is not enough: drop one morning trip, add a noon trip
  auto trips2 = trips;
  trips2[7] = trip("r7b", h, east_north(4000, 25000), 12, 12, 40);
  const PlaceLabeling L2 = generate_places(trips2, cfg);
  CHECK_FALSE(detect_home(L2, trips2, cfg).has_value());
}

TEST_CASE("detect_home none when no trips touch the windows") {
  MinerConfig cfg;
  std::vector<TripRecord> trips;
  for (int i = 0; i < 6; ++i) {
    trips.push_back(
        trip("r" + std::to_string(i), east_north(0, 0), east_north(600, 0), 12, 13, i));
  }
  const PlaceLabeling L = generate_places(trips, cfg);
  CHECK_FALSE(detect_home(L, trips, cfg).has_value());
}

TEST_CASE("detect_work mirrors home with the home pid excluded") {
  MinerConfig cfg;
  std::vector<TripRecord> trips;
  const GeoPoint home_pt = east_north(0, 0);
  const GeoPoint work_pt = east_north(8000, 0);
  // six morning home->work trips, four noon trips elsewhere
  for (int i = 0; i < 6; ++i) {
    trips.push_back(trip("r" + std::to_string(i), home_pt, work_pt, 7, 7, i));
  }
  for (int i = 0; i < 4; ++i) {
    trips.push_back(trip("x" + std::to_string(i), east_north(0, 16000 + i * 2000.0),
                         east_north(600, 30000 + i * 2000.0), 12, 12, 10 + i));
  }
  const PlaceLabeling L = generate_places(trips, cfg);
  const auto home = detect_home(L, trips, cfg);
  REQUIRE(home.has_value());  // morning origins at home: 6/10
  const auto work = detect_work(L, trips, cfg, home->pid);
  REQUIRE(work.has_value());
  CHECK(work->pid == 1);
  CHECK(work->ratio == doctest::Approx(0.6));
  CHECK(work->pid != home->pid);

  // the top work candidate being home itself leaves work undetected when
  // the runner-up is at the threshold
  std::vector<TripRecord> loop;
  for (int i = 0; i < 6; ++i) {
    // morning round trips ending back at home
    loop.push_back(trip("l" + std::to_string(i), home_pt, east_north(300, 0), 8, 8, i));
  }
  for (int i = 0; i < 4; ++i) {
    // morning arrivals at a second place: exactly 40%, not strictly more
    loop.push_back(trip("m" + std::to_string(i), east_north(20000, 0), work_pt, 8, 8, 10 + i));
  }
  const PlaceLabeling L3 = generate_places(loop, cfg);
  const auto h3 = detect_home(L3, loop, cfg);
  REQUIRE(h3.has_value());
  CHECK(h3->pid == 0);
  CHECK_FALSE(detect_work(L3, loop, cfg, h3->pid).has_value());
}

TEST_CASE("detect_work count tie breaks to the lower pid") {
  MinerConfig cfg;
  std::vector<TripRecord> trips;
  const GeoPoint x = east_north(4000, 0);
  const GeoPoint y = east_north(12000, 0);
  for (int i = 0; i < 5; ++i) {
    trips.push_back(trip("a" + std::to_string(i), east_north(0, i * 2000.0), x, 8, 8, i));
  }
  for (int i = 0; i < 5; ++i) {
    trips.push_back(trip("b" + std::to_string(i), east_north(0, 20000 + i * 2000.0), y, 9, 9,
                         10 + i));
  }
  const PlaceLabeling L = generate_places(trips, cfg);
  // no home: origins are one-off places, no count clears 40%
  const auto home = detect_home(L, trips, cfg);
  CHECK_FALSE(home.has_value());
  const auto work = detect_work(L, trips, cfg, std::nullopt);
  REQUIRE(work.has_value());
  const int pid_x = L.dest_pids[0];
  const int pid_y = L.dest_pids[5];
  CHECK(work->pid == std::min(pid_x, pid_y));
  CHECK(work->ratio == doctest::Approx(0.5));
}

TEST_CASE("detect home/work equal exhaustive recount on random users") {
  MinerConfig cfg;
  Rng rng(808);
  for (int rep = 0; rep < 150; ++rep) {
    const auto trips = random_user(rng);
    const PlaceLabeling L = generate_places(trips, cfg);
    // plain recount oracle
    std::vector<long> home_counts(L.place_count(), 0), work_counts(L.place_count(), 0);
    for (std::size_t i = 0; i < trips.size(); ++i) {
      const int oh = hour_of_day(trips[i].o_time, cfg.tz_offset_hours);
      const int dh = hour_of_day(trips[i].d_time, cfg.tz_offset_hours);
      if (oh >= 6 && oh < 11) ++home_counts[L.origin_pids[i]];
      if (dh >= 15 && dh < 20) ++home_counts[L.dest_pids[i]];
      if (dh >= 6 && dh < 11) ++work_counts[L.dest_pids[i]];
      if (oh >= 15 && oh < 20) ++work_counts[L.origin_pids[i]];
    }
    auto argmax = [&](const std::vector<long>& c, int skip) {
      int best = -1;
      for (int p = 0; p < static_cast<int>(c.size()); ++p) {
        if (p == skip) continue;
        if (best < 0 || c[p] > c[best]) best = p;
      }
      return best;
    };
    const auto home = detect_home(L, trips, cfg);
    const int hb = argmax(home_counts, -1);
    const bool home_expected =
        hb >= 0 && static_cast<double>(home_counts[hb]) / trips.size() > 0.40;
    CHECK(home.has_value() == home_expected);
    if (home) {
      CHECK(home->pid == hb);
      CHECK(home->ratio ==
            doctest::Approx(static_cast<double>(home_counts[hb]) / trips.size()));
    }
    const auto work = detect_work(L, trips, cfg, home ? std::optional<int>(home->pid)
                                                      : std::nullopt);
    const int wb = argmax(work_counts, home ? home->pid : -1);
    const bool work_expected =
        wb >= 0 && static_cast<double>(work_counts[wb]) / trips.size() > 0.40;
    CHECK(work.has_value() == work_expected);
    if (work) {
      CHECK(work->pid == wb);
      if (home) CHECK(work->pid != home->pid);
    }
  }
}

TEST_CASE("rank_places") {
  MinerConfig cfg;
  // one place visited 6x, one 3x, one 1x (10 endpoints over 5 trips)
  const GeoPoint a = east_north(0, 0), b = east_north(5000, 0), c = east_north(10000, 0);
  const std::vector<TripRecord> trips{
      trip("r0", a, a, 8, 8, 0),  trip("r1", a, a, 9, 9, 1), trip("r2", a, b, 10, 10, 2),
      trip("r3", b, b, 11, 11, 3), trip("r4", a, c, 12, 12, 4),
  };
  const PlaceLabeling L = generate_places(trips, cfg);
  const auto ranked = rank_places(L);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].rank == 1);
  CHECK(ranked[0].pid == 0);
  CHECK(ranked[0].visit_count == 6);
  CHECK(ranked[0].visit_probability == doctest::Approx(0.6));
  CHECK(ranked[1].visit_probability == doctest::Approx(0.3));
  CHECK(ranked[2].visit_probability == doctest::Approx(0.1));

  // single-place user
  const std::vector<TripRecord> solo{trip("r0", a, east_north(100, 0))};
  const auto one = rank_places(generate_places(solo, cfg));
  REQUIRE(one.size() == 1);
  CHECK(one[0].visit_probability == doctest::Approx(1.0));

  // random labelings vs. independent count-and-sort
  Rng rng(909);
  for (int rep = 0; rep < 100; ++rep) {
    const auto rt = random_user(rng, 10);
    const PlaceLabeling RL = generate_places(rt, cfg);
    const auto rp = rank_places(RL);
    std::vector<std::pair<long, int>> counted(RL.place_count());
    for (int p = 0; p < RL.place_count(); ++p) counted[p] = {0, p};
    for (int p : RL.origin_pids) ++counted[p].first;
    for (int p : RL.dest_pids) ++counted[p].first;
    std::sort(counted.begin(), counted.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    double total_prob = 0.0;
    for (std::size_t i = 0; i < rp.size(); ++i) {
      CHECK(rp[i].pid == counted[i].second);
      CHECK(rp[i].visit_count == counted[i].first);
      if (i > 0) CHECK(rp[i].visit_probability <= rp[i - 1].visit_probability);
      total_prob += rp[i].visit_probability;
    }
    CHECK(std::fabs(total_prob - 1.0) <= 1e-12);
  }
}

TEST_CASE("parallel mine_places equals the serial reference") {
  Rng rng(1010);
  std::vector<TripRecord> records;
  std::set<std::string> users;
  for (int u = 0; u < 40; ++u) {
    auto trips = random_user(rng);
    for (auto& t : trips) t.p_id = "user" + std::to_string(u);
    users.insert("user" + std::to_string(u));
    records.insert(records.end(), trips.begin(), trips.end());
  }
  MinerConfig cfg;
  const auto par = mine_places(records, users, cfg, true);
  const auto ser = serial_ref::mine_places(records, users, cfg);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].labeling.user == ser[i].labeling.user);
    CHECK(par[i].labeling.origin_pids == ser[i].labeling.origin_pids);
    CHECK(par[i].labeling.dest_pids == ser[i].labeling.dest_pids);
    CHECK(par[i].home.has_value() == ser[i].home.has_value());
    if (par[i].home) CHECK(par[i].home->pid == ser[i].home->pid);
    CHECK(par[i].work.has_value() == ser[i].work.has_value());
    if (par[i].work) CHECK(par[i].work->pid == ser[i].work->pid);
  }
}
