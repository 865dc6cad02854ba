#include "mobmine/trip.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "mobmine/errors.hpp"
#include "mobmine/timeutil.hpp"

namespace mobmine {

namespace {

int split_fields(const std::string& line, char delim, std::string_view out[],
                 int max_fields) {
  int count = 0;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (count == max_fields) return max_fields + 1;  // too many
    if (pos == std::string::npos) {
      out[count++] = std::string_view(line).substr(start);
      return count;
    }
    out[count++] = std::string_view(line).substr(start, pos - start);
    start = pos + 1;
  }
}

bool parse_double_field(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

enum class Verdict : std::uint8_t { keep, region, speed };

}  // namespace

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

ParseResult parse_records(std::istream& in, const ParseOptions& opt) {
  ParseResult res;
  std::string line;
  bool first = true;
  std::string_view f[11];
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && opt.header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    ++res.report.total_read;

    const int nf = split_fields(line, opt.delimiter, f, 10);
    if (nf != 10) {
      ++res.report.rejected_parse;
      continue;
    }
    TripRecord r;
    r.r_id = std::string(f[0]);
    r.p_id = std::string(f[1]);
    r.d_id = std::string(f[2]);
    double o_lng, o_lat, d_lng, d_lat;
    const bool nums_ok = parse_double_field(f[3], o_lng) && parse_double_field(f[4], o_lat) &&
                         parse_double_field(f[5], d_lng) && parse_double_field(f[6], d_lat) &&
                         parse_double_field(f[9], r.distance_km);
    const auto ot = parse_timestamp(f[7], opt.tz_offset_hours);
    const auto dt = parse_timestamp(f[8], opt.tz_offset_hours);
    r.origin = {o_lng, o_lat};
    r.dest = {d_lng, d_lat};
    if (!nums_ok || !ot || !dt || r.r_id.empty() || r.p_id.empty() ||
        !valid_geo(r.origin) || !valid_geo(r.dest) || !(r.distance_km > 0.0)) {
      ++res.report.rejected_parse;
      continue;
    }
    r.o_time = *ot;
    r.d_time = *dt;
    if (r.d_time <= r.o_time) {
      ++res.report.rejected_time_order;
      continue;
    }
    res.records.push_back(std::move(r));
  }
  if (in.bad()) throw DataError("I/O error while reading records");
  if (res.records.empty()) throw DataError("no parseable records in input");
  res.report.retained = res.records.size();
  return res;
}

ParseResult parse_records_file(const std::string& path, const ParseOptions& opt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input: " + path);
  return parse_records(in, opt);
}

CleanResult clean(std::vector<TripRecord> records, const Region& region,
                  const CleanOptions& opt) {
  const std::size_t n = records.size();
  std::vector<Verdict> verdict(n, Verdict::keep);

#pragma omp parallel for schedule(static) if (opt.parallel && n > 1024)
  for (std::size_t i = 0; i < n; ++i) {
    TripRecord& r = records[i];
    if (opt.convert_gcj02) {
      r.origin = gcj02_to_wgs84(r.origin);
      r.dest = gcj02_to_wgs84(r.dest);
    }
    if (!in_region(r.origin, region) || !in_region(r.dest, region)) {
      verdict[i] = Verdict::region;
      continue;
    }
    // strict "above the cap": distance/hours > cap, kept in product form so
    // the exact boundary survives rounding
    const double dt_s = static_cast<double>(r.d_time - r.o_time);
    if (r.distance_km * 3600.0 > opt.speed_cap_kmh * dt_s) verdict[i] = Verdict::speed;
  }

  CleanResult out;
  out.report.total_read = n;
  out.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (verdict[i]) {
      case Verdict::keep: out.records.push_back(std::move(records[i])); break;
      case Verdict::region: ++out.report.rejected_region; break;
      case Verdict::speed: ++out.report.rejected_speed; break;
    }
  }
  out.report.retained = out.records.size();
  return out;
}

CleaningReport merge_reports(const CleaningReport& parse_fragment,
                             const CleaningReport& clean_fragment) {
  CleaningReport r;
  r.total_read = parse_fragment.total_read;
  r.rejected_parse = parse_fragment.rejected_parse;
  r.rejected_time_order = parse_fragment.rejected_time_order;
  r.rejected_region = clean_fragment.rejected_region;
  r.rejected_speed = clean_fragment.rejected_speed;
  r.retained = clean_fragment.retained;
  return r;
}

std::set<std::string> select_frequent_users(std::span<const TripRecord> records,
                                            int min_trips_per_month,
                                            std::span<const int> month_keys,
                                            FrequencyMode mode, int tz_offset_hours) {
  if (month_keys.empty()) throw UsageError("select_frequent_users: no months listed");
  std::map<std::string, std::map<int, std::int64_t>> counts;
  for (const auto& r : records) {
    ++counts[r.p_id][month_key(r.o_time, tz_offset_hours)];
  }
  std::set<std::string> out;
  for (const auto& [user, per_month] : counts) {
    if (mode == FrequencyMode::per_month_strict) {
      bool ok = true;
      for (int mk : month_keys) {
        const auto it = per_month.find(mk);
        if (it == per_month.end() || it->second <= min_trips_per_month) {
          ok = false;
          break;
        }
      }
      if (ok) out.insert(user);
    } else {
      std::int64_t total = 0;
      for (int mk : month_keys) {
        const auto it = per_month.find(mk);
        if (it != per_month.end()) total += it->second;
      }
      if (total > static_cast<std::int64_t>(min_trips_per_month) *
                      static_cast<std::int64_t>(month_keys.size())) {
        out.insert(user);
      }
    }
  }
  return out;
}

void write_records(std::ostream& out, std::span<const TripRecord> records, char delimiter) {
  const char d = delimiter;
  out << "R_id" << d << "P_id" << d << "D_id" << d << "O_LNG" << d << "O_LAT" << d
      << "D_LNG" << d << "D_LAT" << d << "O_Time" << d << "D_Time" << d << "L\n";
  for (const auto& r : records) {
    out << r.r_id << d << r.p_id << d << r.d_id << d << format_double(r.origin.lng) << d
        << format_double(r.origin.lat) << d << format_double(r.dest.lng) << d
        << format_double(r.dest.lat) << d << r.o_time << d << r.d_time << d
        << format_double(r.distance_km) << '\n';
  }
}

}  // namespace mobmine
