#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mobmine {

// Civil-date helpers for a fixed-offset zone (records are interpreted in a
// single configured zone, UTC+8 by default; no DST handling).

// Days since 1970-01-01 of the given civil date (Howard Hinnant's algorithm).
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), m, d};
}

// Epoch seconds -> local civil-day index / hour / year-month key.
inline std::int64_t local_day(std::int64_t epoch_s, int tz_offset_hours) {
  const std::int64_t shifted = epoch_s + static_cast<std::int64_t>(tz_offset_hours) * 3600;
  // floor division, robust for pre-1970 values
  return shifted >= 0 ? shifted / 86400 : (shifted - 86399) / 86400;
}

inline int hour_of_day(std::int64_t epoch_s, int tz_offset_hours) {
  const std::int64_t shifted = epoch_s + static_cast<std::int64_t>(tz_offset_hours) * 3600;
  std::int64_t sec = shifted % 86400;
  if (sec < 0) sec += 86400;
  return static_cast<int>(sec / 3600);
}

// year*12 + (month-1); used to group trips per calendar month
inline int month_key(std::int64_t epoch_s, int tz_offset_hours) {
  const CivilDate c = civil_from_days(local_day(epoch_s, tz_offset_hours));
  return c.year * 12 + static_cast<int>(c.month) - 1;
}

// 0 = Sunday ... 6 = Saturday
inline int weekday_of_day(std::int64_t day) {
  std::int64_t w = (day + 4) % 7;
  if (w < 0) w += 7;
  return static_cast<int>(w);
}

std::string format_date(std::int64_t day);  // "YYYY-MM-DD"

// Accepts epoch seconds or "YYYY-MM-DD HH:MM:SS" (interpreted in the zone).
std::optional<std::int64_t> parse_timestamp(std::string_view s, int tz_offset_hours);

// "YYYY-MM-DD" -> local day index
std::optional<std::int64_t> parse_date(std::string_view s);

}  // namespace mobmine
