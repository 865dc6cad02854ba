#include <cmath>

#include "doctest.h"
#include "mobmine/errors.hpp"
#include "mobmine/geo.hpp"
#include "mobmine/rng.hpp"
#include "support/oracles.hpp"

using namespace mobmine;

TEST_CASE("haversine basics") {
  const GeoPoint beijing{116.40, 39.90};
  CHECK(haversine_m(beijing, beijing) == 0.0);
  CHECK(haversine_m({0, 0}, {180, 0}) == doctest::Approx(M_PI * 6371000.0).epsilon(1e-12));

  // two points ~0.01 deg apart in latitude near Beijing
  const GeoPoint a{116.40, 39.90}, b{116.40, 39.91};
  CHECK(std::fabs(haversine_m(a, b) - oracle::sloc_distance_m(a, b)) < 0.01);
}

TEST_CASE("haversine symmetry and triangle inequality") {
  Rng rng(101);
  for (int i = 0; i < 2000; ++i) {
    const GeoPoint a{116.0 + rng.uniform01(), 39.5 + rng.uniform01()};
    const GeoPoint b{116.0 + rng.uniform01(), 39.5 + rng.uniform01()};
    const GeoPoint c{116.0 + rng.uniform01(), 39.5 + rng.uniform01()};
    CHECK(haversine_m(a, b) == haversine_m(b, a));
    CHECK(haversine_m(a, c) <= haversine_m(a, b) + haversine_m(b, c) + 1e-6);
    CHECK(haversine_m(a, b) >= 0.0);
  }
}

TEST_CASE("gcj02 identity outside china") {
  const GeoPoint p{-71.06, 42.36};
  const GeoPoint q = gcj02_to_wgs84(p);
  CHECK(q.lng == p.lng);
  CHECK(q.lat == p.lat);
  const GeoPoint edge{71.9, 30.0};  // lng < 72.004
  const GeoPoint r = gcj02_to_wgs84(edge);
  CHECK(r.lng == edge.lng);
}

TEST_CASE("gcj02 round trip against independent forward oracle") {
  Rng rng(202);
  for (int i = 0; i < 1000; ++i) {
    // mainland box away from the transform's outer cutoffs
    const GeoPoint wgs{80.0 + rng.uniform01() * 50.0, 20.0 + rng.uniform01() * 30.0};
    const GeoPoint gcj = oracle::gcj_forward(wgs);
    const GeoPoint back = gcj02_to_wgs84(gcj);
    CHECK(std::fabs(back.lng - wgs.lng) < 1e-6);
    CHECK(std::fabs(back.lat - wgs.lat) < 1e-6);
  }
}

TEST_CASE("gcj02 shift magnitude in central beijing") {
  const GeoPoint wgs{116.397, 39.909};
  const GeoPoint gcj = oracle::gcj_forward(wgs);
  const GeoPoint back = gcj02_to_wgs84(gcj);
  const double shift = haversine_m(gcj, back);
  CHECK(shift > 100.0);
  CHECK(shift < 800.0);
}

TEST_CASE("in_region boxes") {
  Region box;
  box.kind = Region::Kind::box;
  box.coords = {{116.0, 39.6}, {116.8, 40.2}};
  CHECK(in_region({116.4, 39.9}, box));
  CHECK_FALSE(in_region({120.0, 39.9}, box));
  CHECK(in_region({116.0, 39.6}, box));  // boundary inclusive
}

TEST_CASE("in_region polygon edge and oracle agreement") {
  Region poly;
  poly.kind = Region::Kind::polygon;
  poly.coords = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(in_region({0.5, 0.0}, poly));  // exactly on an edge
  CHECK(in_region({0.0, 0.25}, poly));
  CHECK(in_region({0.5, 0.5}, poly));
  CHECK_FALSE(in_region({1.5, 0.5}, poly));

  // L-shaped polygon vs. ray-casting oracle on a sample of points
  Region ell;
  ell.kind = Region::Kind::polygon;
  ell.coords = {{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  validate_region(ell);
  Rng rng(303);
  for (int i = 0; i < 3000; ++i) {
    const GeoPoint p{rng.uniform01() * 2.5 - 0.25, rng.uniform01() * 2.5 - 0.25};
    CHECK(in_region(p, ell) == oracle::point_in_polygon(p, ell.coords));
  }
}

TEST_CASE("validate_region rejects self-intersection") {
  Region bow;
  bow.kind = Region::Kind::polygon;
  bow.coords = {{0, 0}, {1, 1}, {1, 0}, {0, 1}};
  CHECK_THROWS_AS(validate_region(bow), DataError);
}

TEST_CASE("grid_index corners and boundaries") {
  GridSpec g;  // 116.0..116.8 x 39.6..40.2, 30x30
  const auto top_left = grid_index({g.min_lng, g.max_lat}, g);
  REQUIRE(top_left.has_value());
  CHECK(top_left->col == 0);
  CHECK(top_left->row == 0);

  // center of the bounds sits on the 15th boundary in both axes
  const auto center = grid_index({(g.min_lng + g.max_lng) / 2, (g.min_lat + g.max_lat) / 2}, g);
  REQUIRE(center.has_value());
  CHECK(center->col == 15);
  CHECK(center->row == 15);

  // bottom-right outer boundary clamps to 29
  const auto corner = grid_index({g.max_lng, g.min_lat}, g);
  REQUIRE(corner.has_value());
  CHECK(corner->col == 29);
  CHECK(corner->row == 29);

  CHECK_FALSE(grid_index({115.0, 39.9}, g).has_value());
  CHECK_FALSE(grid_index({116.4, 40.3}, g).has_value());
}

TEST_CASE("grid_index matches floor arithmetic at cell centers") {
  GridSpec g;
  const double cw = (g.max_lng - g.min_lng) / g.n_cols;
  const double ch = (g.max_lat - g.min_lat) / g.n_rows;
  // center of cell (2, 3): col 2 east of min, row 3 south of max
  const GeoPoint p{g.min_lng + (2 + 0.5) * cw, g.max_lat - (3 + 0.5) * ch};
  const auto cell = grid_index(p, g);
  REQUIRE(cell.has_value());
  CHECK(cell->col == 2);
  CHECK(cell->row == 3);

  Rng rng(404);
  for (int i = 0; i < 5000; ++i) {
    const GeoPoint q{g.min_lng + rng.uniform01() * (g.max_lng - g.min_lng),
                     g.min_lat + rng.uniform01() * (g.max_lat - g.min_lat)};
    const auto got = grid_index(q, g);
    REQUIRE(got.has_value());
    int col, row;
    REQUIRE(oracle::grid_cell_of(q, g, col, row));
    CHECK(got->col == col);
    CHECK(got->row == row);
    CHECK(got->col >= 0);
    CHECK(got->col < g.n_cols);
    CHECK(got->row >= 0);
    CHECK(got->row < g.n_rows);
  }
}

TEST_CASE("geo config json") {
  const GeoConfig cfg = parse_geo_config(R"({
    "region": {"kind": "polygon", "coords": [[116.0,39.6],[116.8,39.6],[116.8,40.2],[116.0,40.2],[116.0,39.6]]},
    "grid": {"bounds": [116.0, 39.6, 116.8, 40.2], "n_cols": 10, "n_rows": 12}
  })");
  CHECK(cfg.region.kind == Region::Kind::polygon);
  CHECK(cfg.region.coords.size() == 4);  // explicit closure stripped
  CHECK(cfg.grid.n_cols == 10);
  CHECK(cfg.grid.n_rows == 12);
  CHECK_THROWS_AS(parse_geo_config("{bad json"), DataError);
  CHECK_THROWS_AS(parse_geo_config(R"({"grid": {"bounds": [1, 1, 0, 2]}})"), DataError);
}
