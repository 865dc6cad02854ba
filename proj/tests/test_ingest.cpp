#include <sstream>

#include "doctest.h"
#include "mobmine/errors.hpp"
#include "mobmine/timeutil.hpp"
#include "mobmine/trip.hpp"

using namespace mobmine;

namespace {

Region study_box() {
  Region r;
  r.kind = Region::Kind::box;
  r.coords = {{116.0, 39.6}, {116.8, 40.2}};
  return r;
}

std::string header() {
  return "R_id,P_id,D_id,O_LNG,O_LAT,D_LNG,D_LAT,O_Time,D_Time,L\n";
}

// well-formed line builder; o/d default inside the study box
std::string line(const std::string& rid, const std::string& pid, std::int64_t o_time,
                 std::int64_t d_time, double dist, double o_lng = 116.4, double o_lat = 39.9,
                 double d_lng = 116.5, double d_lat = 39.95) {
  std::ostringstream os;
  os << rid << ',' << pid << ",drv," << o_lng << ',' << o_lat << ',' << d_lng << ',' << d_lat
     << ',' << o_time << ',' << d_time << ',' << dist << '\n';
  return os.str();
}

}  // namespace

TEST_CASE("timestamp parsing") {
  CHECK(parse_timestamp("1488326400", 8) == 1488326400);
  // 2017-03-01 00:00:00 local (UTC+8) = 1488297600 UTC
  CHECK(parse_timestamp("2017-03-01 00:00:00", 8) == 1488297600);
  CHECK(parse_timestamp("2017-03-01 08:30:00", 8) == 1488297600 + 8 * 3600 + 30 * 60);
  CHECK_FALSE(parse_timestamp("2017/03/01 00:00:00", 8).has_value());
  CHECK_FALSE(parse_timestamp("not-a-time", 8).has_value());
  CHECK(hour_of_day(*parse_timestamp("2017-03-01 08:30:00", 8), 8) == 8);
  CHECK(month_key(*parse_timestamp("2017-03-01 08:30:00", 8), 8) == 2017 * 12 + 2);
  CHECK(format_date(*parse_date("2017-03-01")) == "2017-03-01");
}

TEST_CASE("parse_records happy path and rejects") {
  std::istringstream in(
      header() + line("r1", "u1", 1488326400, 1488327000, 5.0) +
      "r2,u2,drv,116.4,91.2,116.5,39.95,1488326400,1488327000,5.0\n" +  // lat 91.2
      line("r3", "u1", 1488330000, 1488330600, 4.0));
  const ParseResult res = parse_records(in);
  CHECK(res.records.size() == 2);
  CHECK(res.report.total_read == 3);
  CHECK(res.report.rejected_parse == 1);
  CHECK(res.records[0].r_id == "r1");
  CHECK(res.records[0].distance_km == 5.0);
}

TEST_CASE("parse_records counts malformed and time-order rejects") {
  std::istringstream in(header() + line("r1", "u1", 100, 200, 5.0) +
                        "too,few,fields\n" +
                        "r2,u2,drv,116.4,39.9,116.5,39.95,xx,200,5.0\n" +
                        line("r3", "u3", 300, 250, 5.0) +  // d_time < o_time
                        line("r4", "u4", 300, 300, 5.0) +  // d_time == o_time
                        line("r5", "u5", 400, 500, 5.0) + line("r6", "u6", 500, 600, 5.0));
  const ParseResult res = parse_records(in);
  CHECK(res.records.size() == 3);
  CHECK(res.report.total_read == 7);
  CHECK(res.report.rejected_parse == 2);
  CHECK(res.report.rejected_time_order == 2);
}

TEST_CASE("parse_records errors on empty input") {
  std::istringstream in(header());
  CHECK_THROWS_AS(parse_records(in), DataError);
}

TEST_CASE("parse accepts tab delimiter and human timestamps") {
  ParseOptions opt;
  opt.delimiter = '\t';
  std::istringstream in(
      "R_id\tP_id\tD_id\tO_LNG\tO_LAT\tD_LNG\tD_LAT\tO_Time\tD_Time\tL\n"
      "r1\tu1\tdrv\t116.4\t39.9\t116.5\t39.95\t2017-03-01 08:00:00\t2017-03-01 "
      "08:20:00\t5.5\n");
  const ParseResult res = parse_records(in, opt);
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].o_time == 1488326400);
  CHECK(res.records[0].d_time == 1488326400 + 1200);
}

TEST_CASE("clean speed boundary is strict") {
  // 10 km in 5 minutes is exactly 120 km/h -> kept
  std::vector<TripRecord> recs;
  std::istringstream in(header() + line("r1", "u1", 1488326400, 1488326400 + 300, 10.0) +
                        line("r2", "u2", 1488326400, 1488326400 + 300, 10.1));
  recs = parse_records(in).records;
  const CleanResult res = clean(std::move(recs), study_box(), {});
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].r_id == "r1");
  CHECK(res.report.rejected_speed == 1);
}

TEST_CASE("clean rejects out-of-region endpoints") {
  std::istringstream in(header() + line("r1", "u1", 100, 700, 5.0) +
                        line("r2", "u2", 100, 700, 5.0, 116.4, 39.9, 117.5, 39.9) +
                        line("r3", "u3", 100, 700, 5.0, 115.2, 39.9, 116.5, 39.9));
  auto recs = parse_records(in).records;
  const CleanResult res = clean(std::move(recs), study_box(), {});
  CHECK(res.records.size() == 1);
  CHECK(res.report.rejected_region == 2);
  CHECK(res.report.retained == 1);
}

TEST_CASE("clean is idempotent and order preserving") {
  std::ostringstream data;
  data << header();
  for (int i = 0; i < 500; ++i) {
    const double lng = 115.9 + 0.002 * i;  // some fall west of the box
    data << line("r" + std::to_string(i), "u" + std::to_string(i % 7), 1488326400 + i * 60,
                 1488326400 + i * 60 + 600 + i, 3.0 + 0.01 * i, lng);
  }
  std::istringstream in(data.str());
  auto recs = parse_records(in).records;
  const CleanResult once = clean(recs, study_box(), {});
  const CleanResult twice = clean(once.records, study_box(), {});
  REQUIRE(once.records.size() == twice.records.size());
  for (std::size_t i = 0; i < once.records.size(); ++i) {
    CHECK(once.records[i].r_id == twice.records[i].r_id);
  }
  CHECK(twice.report.rejected_region == 0);
  CHECK(twice.report.rejected_speed == 0);
  // stable order
  for (std::size_t i = 1; i < once.records.size(); ++i) {
    CHECK(once.records[i - 1].o_time < once.records[i].o_time);
  }
  // merged report reconciles
  std::istringstream in2(data.str());
  const ParseResult parsed = parse_records(in2);
  const CleanResult cleaned = clean(parsed.records, study_box(), {});
  const CleaningReport merged = merge_reports(parsed.report, cleaned.report);
  CHECK(merged.reconciles());
}

TEST_CASE("select_frequent_users strict per month") {
  std::vector<TripRecord> recs;
  auto add_trips = [&](const std::string& user, int year, unsigned month, int n) {
    for (int i = 0; i < n; ++i) {
      TripRecord r;
      r.r_id = user + std::to_string(month) + "_" + std::to_string(i);
      r.p_id = user;
      r.o_time = days_from_civil(year, month, 10) * 86400 + i * 3600;
      r.d_time = r.o_time + 600;
      r.distance_km = 3.0;
      recs.push_back(r);
    }
  };
  const std::vector<int> months = {2017 * 12 + 2, 2017 * 12 + 3, 2017 * 12 + 4, 2017 * 12 + 5};
  add_trips("a", 2017, 3, 11);
  add_trips("a", 2017, 4, 11);
  add_trips("a", 2017, 5, 11);
  add_trips("a", 2017, 6, 11);
  add_trips("b", 2017, 3, 10);  // exactly 10 in one month -> excluded
  add_trips("b", 2017, 4, 20);
  add_trips("b", 2017, 5, 20);
  add_trips("b", 2017, 6, 20);

  const auto strict = select_frequent_users(recs, 10, months,
                                            FrequencyMode::per_month_strict, 8);
  CHECK(strict == std::set<std::string>{"a"});

  // average mode: b has 70 > 40 total
  const auto avg =
      select_frequent_users(recs, 10, months, FrequencyMode::monthly_average, 8);
  CHECK(avg == std::set<std::string>{"a", "b"});

  const auto none = select_frequent_users(std::vector<TripRecord>{}, 10, months,
                                          FrequencyMode::per_month_strict, 8);
  CHECK(none.empty());

  CHECK_THROWS_AS(
      select_frequent_users(recs, 10, std::vector<int>{}, FrequencyMode::per_month_strict, 8),
      UsageError);
}

TEST_CASE("write_records round trip is a fixpoint") {
  std::istringstream in(header() +
                        line("r1", "u1", 1488326400, 1488327000, 5.123456789012345) +
                        line("r2", "u2", 1488330000, 1488330600, 0.1));
  const auto recs = parse_records(in).records;
  std::ostringstream first;
  write_records(first, recs);
  std::istringstream in2(first.str());
  const auto reparsed = parse_records(in2).records;
  std::ostringstream second;
  write_records(second, reparsed);
  CHECK(first.str() == second.str());
  REQUIRE(reparsed.size() == 2);
  CHECK(reparsed[0].distance_km == recs[0].distance_km);
}
