#include "mobmine/timeutil.hpp"

#include <charconv>
#include <cstdio>

namespace mobmine {

namespace {

bool parse_int_field(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int value = 0;
  const char* first = s.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc() || ptr != first + len) return false;
  out = value;
  return true;
}

}  // namespace

std::string format_date(std::int64_t day) {
  const CivilDate c = civil_from_days(day);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", c.year, c.month, c.day);
  return buf;
}

std::optional<std::int64_t> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y, m, d;
  if (!parse_int_field(s, 0, 4, y) || !parse_int_field(s, 5, 2, m) ||
      !parse_int_field(s, 8, 2, d)) {
    return std::nullopt;
  }
  if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
  return days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

std::optional<std::int64_t> parse_timestamp(std::string_view s, int tz_offset_hours) {
  if (s.empty()) return std::nullopt;

  // epoch seconds: optional sign, digits only
  bool all_digits = true;
  for (std::size_t i = (s[0] == '-' ? 1 : 0); i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') {
      all_digits = false;
      break;
    }
  }
  if (all_digits && !(s.size() == 1 && s[0] == '-')) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
  }

  // "YYYY-MM-DD HH:MM:SS"
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || s[10] != ' ' || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  int y, mo, d, h, mi, sec;
  if (!parse_int_field(s, 0, 4, y) || !parse_int_field(s, 5, 2, mo) ||
      !parse_int_field(s, 8, 2, d) || !parse_int_field(s, 11, 2, h) ||
      !parse_int_field(s, 14, 2, mi) || !parse_int_field(s, 17, 2, sec)) {
    return std::nullopt;
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) {
    return std::nullopt;
  }
  const std::int64_t day = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return day * 86400 + h * 3600 + mi * 60 + sec -
         static_cast<std::int64_t>(tz_offset_hours) * 3600;
}

}  // namespace mobmine
