#include "mobmine/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "mobmine/errors.hpp"

namespace mobmine {

namespace {

inline double radians(double deg) { return deg * (M_PI / 180.0); }

// GCJ-02 forward obfuscation (WGS84 -> GCJ-02); the public-domain series
// used by every open implementation of the transform.
constexpr double kGcjA = 6378245.0;
constexpr double kGcjEe = 0.00669342162296594323;

bool outside_china(const GeoPoint& p) {
  return p.lng < 72.004 || p.lng > 137.8347 || p.lat < 0.8293 || p.lat > 55.8271;
}

double gcj_delta_lat(double x, double y) {
  double r = -100.0 + 2.0 * x + 3.0 * y + 0.2 * y * y + 0.1 * x * y +
             0.2 * std::sqrt(std::fabs(x));
  r += (20.0 * std::sin(6.0 * x * M_PI) + 20.0 * std::sin(2.0 * x * M_PI)) * 2.0 / 3.0;
  r += (20.0 * std::sin(y * M_PI) + 40.0 * std::sin(y / 3.0 * M_PI)) * 2.0 / 3.0;
  r += (160.0 * std::sin(y / 12.0 * M_PI) + 320.0 * std::sin(y * M_PI / 30.0)) * 2.0 / 3.0;
  return r;
}

double gcj_delta_lng(double x, double y) {
  double r = 300.0 + x + 2.0 * y + 0.1 * x * x + 0.1 * x * y +
             0.1 * std::sqrt(std::fabs(x));
  r += (20.0 * std::sin(6.0 * x * M_PI) + 20.0 * std::sin(2.0 * x * M_PI)) * 2.0 / 3.0;
  r += (20.0 * std::sin(x * M_PI) + 40.0 * std::sin(x / 3.0 * M_PI)) * 2.0 / 3.0;
  r += (150.0 * std::sin(x / 12.0 * M_PI) + 300.0 * std::sin(x / 30.0 * M_PI)) * 2.0 / 3.0;
  return r;
}

GeoPoint wgs84_to_gcj02(const GeoPoint& p) {
  if (outside_china(p)) return p;
  const double x = p.lng - 105.0;
  const double y = p.lat - 35.0;
  double dlat = gcj_delta_lat(x, y);
  double dlng = gcj_delta_lng(x, y);
  const double rad_lat = radians(p.lat);
  double magic = std::sin(rad_lat);
  magic = 1.0 - kGcjEe * magic * magic;
  const double sqrt_magic = std::sqrt(magic);
  dlat = (dlat * 180.0) / ((kGcjA * (1.0 - kGcjEe)) / (magic * sqrt_magic) * M_PI);
  dlng = (dlng * 180.0) / (kGcjA / sqrt_magic * std::cos(rad_lat) * M_PI);
  return {p.lng + dlng, p.lat + dlat};
}

// exact point-on-segment test (consistent with the boundary-inclusive rule)
bool on_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double cross = (b.lng - a.lng) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lng - a.lng);
  if (cross != 0.0) return false;
  return p.lng >= std::min(a.lng, b.lng) && p.lng <= std::max(a.lng, b.lng) &&
         p.lat >= std::min(a.lat, b.lat) && p.lat <= std::max(a.lat, b.lat);
}

bool segments_properly_intersect(const GeoPoint& a, const GeoPoint& b, const GeoPoint& c,
                                 const GeoPoint& d) {
  auto orient = [](const GeoPoint& p, const GeoPoint& q, const GeoPoint& r) {
    const double v = (q.lng - p.lng) * (r.lat - p.lat) - (q.lat - p.lat) * (r.lng - p.lng);
    return (v > 0.0) - (v < 0.0);
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

}  // namespace

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = radians(a.lat);
  const double phi2 = radians(b.lat);
  const double s1 = std::sin(radians(b.lat - a.lat) * 0.5);
  const double s2 = std::sin(radians(b.lng - a.lng) * 0.5);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

GeoPoint gcj02_to_wgs84(const GeoPoint& gcj) {
  if (outside_china(gcj)) return gcj;
  GeoPoint w = gcj;
  for (int it = 0; it < 100; ++it) {
    const GeoPoint f = wgs84_to_gcj02(w);
    const GeoPoint next{w.lng - (f.lng - gcj.lng), w.lat - (f.lat - gcj.lat)};
    const bool settled =
        std::fabs(next.lng - w.lng) < 1e-7 && std::fabs(next.lat - w.lat) < 1e-7;
    w = next;
    if (settled) return w;
  }
  throw DataError("gcj02_to_wgs84: no convergence after 100 iterations");
}

bool in_region(const GeoPoint& p, const Region& r) {
  if (r.kind == Region::Kind::box) {
    const GeoPoint& lo = r.coords[0];
    const GeoPoint& hi = r.coords[1];
    return p.lng >= lo.lng && p.lng <= hi.lng && p.lat >= lo.lat && p.lat <= hi.lat;
  }
  const std::size_t n = r.coords.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (on_segment(p, r.coords[i], r.coords[(i + 1) % n])) return true;
  }
  bool inside = false;
  for (std::size_t i = 0; i < n; ++i) {
    const GeoPoint& a = r.coords[i];
    const GeoPoint& b = r.coords[(i + 1) % n];
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      const double x_cross = a.lng + (p.lat - a.lat) * (b.lng - a.lng) / (b.lat - a.lat);
      if (p.lng < x_cross) inside = !inside;
    }
  }
  return inside;
}

std::optional<GridCell> grid_index(const GeoPoint& p, const GridSpec& g) {
  if (p.lng < g.min_lng || p.lng > g.max_lng || p.lat < g.min_lat || p.lat > g.max_lat) {
    return std::nullopt;
  }
  // tiny nudge so points computed to lie on a boundary land in the
  // higher-index cell despite rounding
  const double u = (p.lng - g.min_lng) / (g.max_lng - g.min_lng) * g.n_cols;
  const double v = (g.max_lat - p.lat) / (g.max_lat - g.min_lat) * g.n_rows;
  int col = static_cast<int>(std::floor(u + 1e-9));
  int row = static_cast<int>(std::floor(v + 1e-9));
  col = std::clamp(col, 0, g.n_cols - 1);
  row = std::clamp(row, 0, g.n_rows - 1);
  return GridCell{col, row};
}

void validate_grid(const GridSpec& g) {
  if (!(g.min_lng < g.max_lng) || !(g.min_lat < g.max_lat)) {
    throw DataError("grid bounds must satisfy min < max on both axes");
  }
  if (g.n_cols < 1 || g.n_rows < 1) throw DataError("grid needs at least one cell");
}

void validate_region(const Region& r) {
  for (const auto& p : r.coords) {
    if (!valid_geo(p)) throw DataError("region vertex outside lng/lat range");
  }
  if (r.kind == Region::Kind::box) {
    if (r.coords.size() != 2) throw DataError("box region needs exactly two corners");
    if (!(r.coords[0].lng < r.coords[1].lng) || !(r.coords[0].lat < r.coords[1].lat)) {
      throw DataError("box region must have min corner < max corner");
    }
    return;
  }
  const std::size_t n = r.coords.size();
  if (n < 3) throw DataError("polygon region needs at least three vertices");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_properly_intersect(r.coords[i], r.coords[(i + 1) % n], r.coords[j],
                                      r.coords[(j + 1) % n])) {
        throw DataError("polygon region is self-intersecting");
      }
    }
  }
}

namespace {

GeoConfig geo_config_from_json(const nlohmann::json& j) {
  GeoConfig cfg;
  if (j.contains("region")) {
    const auto& jr = j.at("region");
    const std::string kind = jr.value("kind", "box");
    if (kind == "box") {
      cfg.region.kind = Region::Kind::box;
    } else if (kind == "polygon") {
      cfg.region.kind = Region::Kind::polygon;
    } else {
      throw DataError("region.kind must be 'box' or 'polygon'");
    }
    if (jr.contains("coords")) {
      cfg.region.coords.clear();
      for (const auto& c : jr.at("coords")) {
        cfg.region.coords.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
      }
      // accept an explicitly closed ring
      if (cfg.region.kind == Region::Kind::polygon && cfg.region.coords.size() > 3) {
        const auto& f = cfg.region.coords.front();
        const auto& l = cfg.region.coords.back();
        if (f.lng == l.lng && f.lat == l.lat) cfg.region.coords.pop_back();
      }
    }
  }
  if (j.contains("grid")) {
    const auto& jg = j.at("grid");
    if (jg.contains("bounds")) {
      const auto& b = jg.at("bounds");
      cfg.grid.min_lng = b.at(0).get<double>();
      cfg.grid.min_lat = b.at(1).get<double>();
      cfg.grid.max_lng = b.at(2).get<double>();
      cfg.grid.max_lat = b.at(3).get<double>();
    }
    cfg.grid.n_cols = jg.value("n_cols", cfg.grid.n_cols);
    cfg.grid.n_rows = jg.value("n_rows", cfg.grid.n_rows);
  }
  validate_region(cfg.region);
  validate_grid(cfg.grid);
  return cfg;
}

}  // namespace

GeoConfig parse_geo_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad geo config JSON: ") + e.what());
  }
  try {
    return geo_config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad geo config JSON: ") + e.what());
  }
}

GeoConfig load_geo_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open geo config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_geo_config(text);
}

}  // namespace mobmine
