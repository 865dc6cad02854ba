#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mobmine {

// WGS84 degrees unless stated otherwise.
struct GeoPoint {
  double lng = 0.0;
  double lat = 0.0;
};

inline bool valid_geo(const GeoPoint& p) {
  return p.lng >= -180.0 && p.lng <= 180.0 && p.lat >= -90.0 && p.lat <= 90.0;
}

struct GridCell {
  int col = 0;
  int row = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
  friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

struct GridSpec {
  double min_lng = 116.0;
  double min_lat = 39.6;
  double max_lng = 116.8;
  double max_lat = 40.2;
  int n_cols = 30;
  int n_rows = 30;
};

struct Region {
  enum class Kind { box, polygon };
  Kind kind = Kind::box;
  // box: exactly two points (min corner, max corner); polygon: the ring,
  // first vertex not repeated at the end
  std::vector<GeoPoint> coords = {{116.0, 39.6}, {116.8, 40.2}};
};

inline constexpr double kEarthRadiusM = 6371000.0;

// Great-circle distance in meters on a sphere of radius kEarthRadiusM.
double haversine_m(const GeoPoint& a, const GeoPoint& b);

// Inverse of the GCJ-02 obfuscation, solved iteratively until successive
// iterates differ by < 1e-7 degrees. Points outside mainland-China bounds
// pass through unchanged. Throws DataError after 100 iterations.
GeoPoint gcj02_to_wgs84(const GeoPoint& gcj);

// true iff inside or on the boundary; polygons use the even-odd rule
bool in_region(const GeoPoint& p, const Region& r);

// col counts eastward from min_lng, row counts SOUTHWARD from max_lat.
// Interior boundaries go to the higher-index cell, the outer max edge
// clamps to n-1, outside the bounds -> nullopt.
std::optional<GridCell> grid_index(const GeoPoint& p, const GridSpec& g);

void validate_grid(const GridSpec& g);
void validate_region(const Region& r);

// JSON config document with keys region.kind, region.coords, grid.bounds,
// grid.n_cols, grid.n_rows. Missing sections keep the defaults.
struct GeoConfig {
  Region region;
  GridSpec grid;
};
GeoConfig load_geo_config(const std::string& path);
GeoConfig parse_geo_config(const std::string& json_text);

}  // namespace mobmine
