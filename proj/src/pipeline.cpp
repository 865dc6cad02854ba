#include "mobmine/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "mobmine/errors.hpp"
#include "mobmine/timeutil.hpp"

namespace mobmine {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config -------------------------------------------------------------

PipelineConfig default_pipeline_config() {
  PipelineConfig cfg;
  cfg.window.start_day = days_from_civil(2017, 3, 1);
  cfg.window.end_day = days_from_civil(2017, 6, 30);
  return cfg;
}

std::uint64_t fnv1a_hash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string pipeline_config_to_json_text(const PipelineConfig& cfg) {
  json j;
  j["region"]["kind"] = cfg.region.kind == Region::Kind::box ? "box" : "polygon";
  auto& coords = j["region"]["coords"] = json::array();
  for (const auto& p : cfg.region.coords) coords.push_back({p.lng, p.lat});
  j["grid"] = {{"bounds", {cfg.grid.min_lng, cfg.grid.min_lat, cfg.grid.max_lng, cfg.grid.max_lat}},
               {"n_cols", cfg.grid.n_cols},
               {"n_rows", cfg.grid.n_rows}};
  j["parse"] = {{"delimiter", std::string(1, cfg.parse.delimiter)},
                {"header", cfg.parse.header},
                {"tz_offset_hours", cfg.parse.tz_offset_hours}};
  j["cleaning"] = {{"speed_cap_kmh", cfg.cleaning.speed_cap_kmh},
                   {"convert_gcj02", cfg.cleaning.convert_gcj02}};
  j["miner"] = {{"d_th_m", cfg.miner.d_th_m},
                {"ratio_threshold", cfg.miner.home_work_ratio},
                {"morning_window", {cfg.miner.morning_begin, cfg.miner.morning_end}},
                {"evening_window", {cfg.miner.evening_begin, cfg.miner.evening_end}},
                {"strict_alg1_origin_first", cfg.miner.strict_alg1_origin_first}};
  j["frequent"] = {{"min_monthly_trips", cfg.min_monthly_trips},
                   {"mode", cfg.frequency_mode == FrequencyMode::per_month_strict
                                ? "per_month_strict"
                                : "monthly_average"}};
  j["window"] = {{"start", format_date(cfg.window.start_day)},
                 {"end", format_date(cfg.window.end_day)}};
  auto& fams = j["fit"]["families"] = json::array();
  for (Family f : cfg.fit_families) fams.push_back(std::string(family_name(f)));
  j["fit"]["subsample"] = cfg.fit_subsample;
  j["stats"] = {{"gap_bin_min", cfg.gap_bin_min}, {"gap_max_min", cfg.gap_max_min}};
  return j.dump(2) + "\n";
}

PipelineConfig pipeline_config_from_json_text(const std::string& text) {
  PipelineConfig cfg = default_pipeline_config();
  try {
    const json j = json::parse(text);
    if (j.contains("region") || j.contains("grid")) {
      const GeoConfig gc = parse_geo_config(text);
      if (j.contains("region")) cfg.region = gc.region;
      if (j.contains("grid")) cfg.grid = gc.grid;
    }
    if (j.contains("parse")) {
      const auto& jp = j.at("parse");
      if (jp.contains("delimiter")) {
        const auto d = jp.at("delimiter").get<std::string>();
        if (d.size() != 1) throw DataError("config: delimiter must be one character");
        cfg.parse.delimiter = d[0];
      }
      cfg.parse.header = jp.value("header", cfg.parse.header);
      cfg.parse.tz_offset_hours = jp.value("tz_offset_hours", cfg.parse.tz_offset_hours);
    }
    if (j.contains("cleaning")) {
      const auto& jc = j.at("cleaning");
      cfg.cleaning.speed_cap_kmh = jc.value("speed_cap_kmh", cfg.cleaning.speed_cap_kmh);
      cfg.cleaning.convert_gcj02 = jc.value("convert_gcj02", cfg.cleaning.convert_gcj02);
    }
    if (j.contains("miner")) {
      const auto& jm = j.at("miner");
      cfg.miner.d_th_m = jm.value("d_th_m", cfg.miner.d_th_m);
      cfg.miner.home_work_ratio = jm.value("ratio_threshold", cfg.miner.home_work_ratio);
      if (jm.contains("morning_window")) {
        cfg.miner.morning_begin = jm.at("morning_window").at(0).get<int>();
        cfg.miner.morning_end = jm.at("morning_window").at(1).get<int>();
      }
      if (jm.contains("evening_window")) {
        cfg.miner.evening_begin = jm.at("evening_window").at(0).get<int>();
        cfg.miner.evening_end = jm.at("evening_window").at(1).get<int>();
      }
      cfg.miner.strict_alg1_origin_first =
          jm.value("strict_alg1_origin_first", cfg.miner.strict_alg1_origin_first);
    }
    if (j.contains("frequent")) {
      cfg.min_monthly_trips = j.at("frequent").value("min_monthly_trips", cfg.min_monthly_trips);
      const std::string mode = j.at("frequent").value("mode", "per_month_strict");
      cfg.frequency_mode = mode == "monthly_average" ? FrequencyMode::monthly_average
                                                     : FrequencyMode::per_month_strict;
    }
    if (j.contains("window")) {
      const auto s = parse_date(j.at("window").at("start").get<std::string>());
      const auto e = parse_date(j.at("window").at("end").get<std::string>());
      if (!s || !e) throw DataError("config: bad window dates");
      cfg.window = {*s, *e};
    }
    if (j.contains("fit")) {
      const auto& jf = j.at("fit");
      if (jf.contains("families")) {
        cfg.fit_families.clear();
        for (const auto& name : jf.at("families")) {
          const auto f = family_from_name(name.get<std::string>());
          if (!f) throw DataError("config: unknown family " + name.get<std::string>());
          cfg.fit_families.push_back(*f);
        }
        if (cfg.fit_families.empty()) throw DataError("config: empty family list");
      }
      cfg.fit_subsample = jf.value("subsample", cfg.fit_subsample);
    }
    if (j.contains("stats")) {
      cfg.gap_bin_min = j.at("stats").value("gap_bin_min", cfg.gap_bin_min);
      cfg.gap_max_min = j.at("stats").value("gap_max_min", cfg.gap_max_min);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("bad pipeline config JSON: ") + e.what());
  }
  cfg.miner.tz_offset_hours = cfg.parse.tz_offset_hours;
  validate_region(cfg.region);
  validate_grid(cfg.grid);
  return cfg;
}

// ---- artifact session -----------------------------------------------------

void ArtifactSession::write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw DataError("failed writing " + path.string());
  written_.push_back(path);
}

void ArtifactSession::discard_all() {
  for (const auto& p : written_) {
    std::error_code ec;
    fs::remove(p, ec);
  }
  written_.clear();
}

// ---- places JSON ----------------------------------------------------------

std::string places_to_json_text(std::span<const UserPlaces> users) {
  json j;
  auto& arr = j["users"] = json::array();
  for (const auto& u : users) {
    json ju;
    ju["p_id"] = u.labeling.user;
    ju["max_pid"] = u.labeling.max_pid;
    ju["origin_pids"] = u.labeling.origin_pids;
    ju["dest_pids"] = u.labeling.dest_pids;
    auto& places = ju["places"] = json::array();
    for (int pid = 0; pid < u.labeling.place_count(); ++pid) {
      int function = 2;
      double support = 0.0;
      if (u.home && u.home->pid == pid) {
        function = 0;
        support = u.home->ratio;
      } else if (u.work && u.work->pid == pid) {
        function = 1;
        support = u.work->ratio;
      }
      const GeoPoint c = place_centroid(u.labeling, pid);
      places.push_back({{"pid", pid},
                        {"function", function},
                        {"support_ratio", support},
                        {"member_count", u.labeling.members[pid].size()},
                        {"centroid", {c.lng, c.lat}}});
    }
    arr.push_back(std::move(ju));
  }
  return j.dump(2) + "\n";
}

std::vector<UserPlacesFile> places_from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<UserPlacesFile> out;
  try {
    json j;
    in >> j;
    for (const auto& ju : j.at("users")) {
      UserPlacesFile u;
      u.p_id = ju.at("p_id").get<std::string>();
      u.max_pid = ju.at("max_pid").get<int>();
      u.origin_pids = ju.at("origin_pids").get<std::vector<int>>();
      u.dest_pids = ju.at("dest_pids").get<std::vector<int>>();
      for (const auto& jp : ju.at("places")) {
        PlaceFileRecord p;
        p.pid = jp.at("pid").get<int>();
        p.function = jp.at("function").get<int>();
        p.support_ratio = jp.at("support_ratio").get<double>();
        p.member_count = jp.at("member_count").get<int>();
        p.centroid = {jp.at("centroid").at(0).get<double>(),
                      jp.at("centroid").at(1).get<double>()};
        u.places.push_back(p);
      }
      out.push_back(std::move(u));
    }
  } catch (const json::exception& e) {
    throw DataError("bad places JSON: " + std::string(e.what()));
  }
  return out;
}

// ---- classified CSV --------------------------------------------------------

void write_classified_csv(std::ostream& out, std::span<const ClassifiedTrip> trips) {
  out << "r_id,p_id,d_id,o_lng,o_lat,d_lng,d_lat,o_time,d_time,distance_km,"
         "klass,duration_min,o_col,o_row,d_col,d_row\n";
  for (const auto& t : trips) {
    const auto& b = t.base;
    out << b.r_id << ',' << b.p_id << ',' << b.d_id << ',' << format_double(b.origin.lng)
        << ',' << format_double(b.origin.lat) << ',' << format_double(b.dest.lng) << ','
        << format_double(b.dest.lat) << ',' << b.o_time << ',' << b.d_time << ','
        << format_double(b.distance_km) << ',' << trip_class_name(t.klass) << ','
        << format_double(t.duration_min) << ',' << (t.origin_cell ? t.origin_cell->col : -1)
        << ',' << (t.origin_cell ? t.origin_cell->row : -1) << ','
        << (t.dest_cell ? t.dest_cell->col : -1) << ','
        << (t.dest_cell ? t.dest_cell->row : -1) << '\n';
  }
}

std::vector<ClassifiedTrip> parse_classified_csv(const fs::path& path,
                                                 const PipelineConfig& cfg) {
  (void)cfg;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ClassifiedTrip> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      first = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        f.push_back(line.substr(start));
        break;
      }
      f.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (f.size() != 16) throw DataError("bad classified CSV row in " + path.string());
    try {
      ClassifiedTrip t;
      t.base.r_id = f[0];
      t.base.p_id = f[1];
      t.base.d_id = f[2];
      t.base.origin = {std::stod(f[3]), std::stod(f[4])};
      t.base.dest = {std::stod(f[5]), std::stod(f[6])};
      t.base.o_time = std::stoll(f[7]);
      t.base.d_time = std::stoll(f[8]);
      t.base.distance_km = std::stod(f[9]);
      t.klass = f[10] == "commuting" ? TripClass::commuting : TripClass::non_commuting;
      t.duration_min = std::stod(f[11]);
      const int oc = std::stoi(f[12]), orow = std::stoi(f[13]);
      const int dc = std::stoi(f[14]), drow = std::stoi(f[15]);
      if (oc >= 0) t.origin_cell = GridCell{oc, orow};
      if (dc >= 0) t.dest_cell = GridCell{dc, drow};
      out.push_back(std::move(t));
    } catch (const std::exception&) {
      throw DataError("bad classified CSV value in " + path.string());
    }
  }
  if (out.empty()) throw DataError("no classified trips in " + path.string());
  return out;
}

std::vector<double> read_column_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v = 0;
    const char* first = line.data();
    auto [ptr, ec] = std::from_chars(first, first + line.size(), v);
    if (ec != std::errc() || ptr != first + line.size()) {
      throw DataError("bad numeric line in " + path.string() + ": " + line);
    }
    out.push_back(v);
  }
  if (out.empty()) throw DataError("empty column file " + path.string());
  return out;
}

// ---- stages -----------------------------------------------------------------

namespace {

json report_to_json(const CleaningReport& r) {
  return {{"total_read", r.total_read},
          {"rejected_parse", r.rejected_parse},
          {"rejected_region", r.rejected_region},
          {"rejected_speed", r.rejected_speed},
          {"rejected_time_order", r.rejected_time_order},
          {"retained", r.retained}};
}

std::vector<int> window_month_keys(const DateWindow& w) {
  std::vector<int> keys;
  for (std::int64_t day = w.start_day; day <= w.end_day; ++day) {
    const CivilDate c = civil_from_days(day);
    const int key = c.year * 12 + static_cast<int>(c.month) - 1;
    if (keys.empty() || keys.back() != key) keys.push_back(key);
  }
  return keys;
}

std::vector<TripRecord> sorted_user_trips(std::vector<TripRecord> trips) {
  std::sort(trips.begin(), trips.end(), [](const TripRecord& a, const TripRecord& b) {
    if (a.o_time != b.o_time) return a.o_time < b.o_time;
    return a.r_id < b.r_id;
  });
  return trips;
}

// deterministic stride subsample for the fit columns
std::vector<double> subsample(const std::vector<double>& xs, std::size_t cap) {
  if (cap == 0 || xs.size() <= cap) return xs;
  std::vector<double> out;
  out.reserve(cap);
  const double stride = static_cast<double>(xs.size()) / static_cast<double>(cap);
  for (std::size_t i = 0; i < cap; ++i) {
    out.push_back(xs[static_cast<std::size_t>(i * stride)]);
  }
  return out;
}

}  // namespace

CleaningReport stage_clean(const fs::path& input_csv, const fs::path& out_dir,
                           const PipelineConfig& cfg, ArtifactSession& session) {
  ParseResult parsed = parse_records_file(input_csv.string(), cfg.parse);
  CleanOptions opt = cfg.cleaning;
  opt.parallel = cfg.parallel;
  CleanResult cleaned = clean(std::move(parsed.records), cfg.region, opt);
  const CleaningReport report = merge_reports(parsed.report, cleaned.report);

  std::ostringstream csv;
  write_records(csv, cleaned.records, cfg.parse.delimiter);
  session.write_file(out_dir / kCleanedCsv, csv.str());
  session.write_file(out_dir / kCleaningReportJson, report_to_json(report).dump(2) + "\n");
  return report;
}

void stage_mine(const fs::path& cleaned_csv, const fs::path& out_dir,
                const PipelineConfig& cfg, ArtifactSession& session) {
  ParseResult parsed = parse_records_file(cleaned_csv.string(), cfg.parse);
  const std::vector<int> months = window_month_keys(cfg.window);
  const std::set<std::string> users =
      select_frequent_users(parsed.records, cfg.min_monthly_trips, months,
                            cfg.frequency_mode, cfg.parse.tz_offset_hours);
  const std::vector<UserPlaces> mined =
      mine_places(parsed.records, users, cfg.miner, cfg.parallel);
  session.write_file(out_dir / kPlacesJson, places_to_json_text(mined));
}

void stage_classify(const fs::path& cleaned_csv, const fs::path& places_json,
                    const fs::path& out_dir, const PipelineConfig& cfg,
                    ArtifactSession& session) {
  ParseResult parsed = parse_records_file(cleaned_csv.string(), cfg.parse);
  const std::vector<UserPlacesFile> users = places_from_json_file(places_json);

  std::map<std::string, std::vector<TripRecord>> grouped;
  for (auto& r : parsed.records) grouped[r.p_id].push_back(std::move(r));

  std::vector<ClassifiedTrip> all;
  for (const auto& u : users) {
    auto it = grouped.find(u.p_id);
    if (it == grouped.end()) throw DataError("classify: no trips for labeled user " + u.p_id);
    const std::vector<TripRecord> trips = sorted_user_trips(std::move(it->second));
    if (trips.size() != u.origin_pids.size()) {
      throw DataError("classify: trips of " + u.p_id + " do not match the labeling");
    }
    PlaceLabeling L;
    L.user = u.p_id;
    L.origin_pids = u.origin_pids;
    L.dest_pids = u.dest_pids;
    L.max_pid = u.max_pid;
    std::optional<int> home, work;
    for (const auto& p : u.places) {
      if (p.function == 0) home = p.pid;
      if (p.function == 1) work = p.pid;
    }
    const std::vector<ClassifiedTrip> classified =
        classify_trips(trips, L, home, work, cfg.grid);
    all.insert(all.end(), classified.begin(), classified.end());
  }
  std::ostringstream csv;
  write_classified_csv(csv, all);
  session.write_file(out_dir / kClassifiedCsv, csv.str());
}

void stage_stats(const fs::path& classified_csv, const fs::path& places_json,
                 const fs::path& out_dir, const PipelineConfig& cfg,
                 ArtifactSession& session) {
  const std::vector<ClassifiedTrip> trips = parse_classified_csv(classified_csv, cfg);
  const std::vector<UserPlacesFile> users = places_from_json_file(places_json);

  HistogramSet h = temporal_histograms(trips, cfg.window, cfg.parse.tz_offset_hours,
                                       cfg.gap_bin_min, cfg.gap_max_min);
  for (const auto& u : users) ++h.place_count_histogram[u.max_pid + 1];

  {
    std::ostringstream csv;
    csv << "date,commuting,non_commuting\n";
    for (const auto& [day, counts] : h.daily_counts) {
      csv << format_date(day) << ',' << counts[0] << ',' << counts[1] << '\n';
    }
    session.write_file(out_dir / "daily_counts.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "hour,class,mean_trips\n";
    for (int cls = 0; cls < 2; ++cls) {
      for (int hr = 0; hr < 24; ++hr) {
        csv << hr << ',' << trip_class_name(static_cast<TripClass>(cls)) << ','
            << format_double(h.hourly_profile[cls][hr]) << '\n';
      }
    }
    session.write_file(out_dir / "hourly_profile.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "bin_start_min,bin_end_min,count\n";
    for (std::size_t i = 0; i < h.gap_histogram.size(); ++i) {
      if (h.gap_histogram[i] == 0) continue;
      csv << format_double(i * h.gap_bin_min) << ',' << format_double((i + 1) * h.gap_bin_min)
          << ',' << h.gap_histogram[i] << '\n';
    }
    session.write_file(out_dir / "gap_histogram.csv", csv.str());
  }
  {
    std::vector<TripRecord> bases;
    bases.reserve(trips.size());
    for (const auto& t : trips) bases.push_back(t.base);
    const auto gap_means = mean_gap_by_monthly_trips(bases, cfg.parse.tz_offset_hours);
    std::ostringstream csv;
    csv << "monthly_trips,mean_gap_min\n";
    for (const auto& [count, mean] : gap_means) {
      csv << count << ',' << format_double(mean) << '\n';
    }
    session.write_file(out_dir / "gap_by_monthly_trips.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "n_places,users\n";
    for (const auto& [pc, n] : h.place_count_histogram) csv << pc << ',' << n << '\n';
    session.write_file(out_dir / "place_count_histogram.csv", csv.str());
  }
  {
    // rank curves from the labeling stored in places.json
    std::map<std::pair<int, int>, std::pair<double, std::int64_t>> acc;
    for (const auto& u : users) {
      const int pc = u.max_pid + 1;
      std::vector<std::int64_t> counts(pc, 0);
      for (int pid : u.origin_pids) ++counts[pid];
      for (int pid : u.dest_pids) ++counts[pid];
      std::vector<int> order(pc);
      for (int i = 0; i < pc; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (counts[a] != counts[b]) return counts[a] > counts[b];
        return a < b;
      });
      const double total = static_cast<double>(u.origin_pids.size() + u.dest_pids.size());
      for (int rank = 1; rank <= pc; ++rank) {
        auto& a = acc[{pc, rank}];
        a.first += static_cast<double>(counts[order[rank - 1]]) / total;
        ++a.second;
      }
    }
    std::ostringstream csv;
    csv << "n_places,rank,mean_probability,users\n";
    for (const auto& [key, a] : acc) {
      csv << key.first << ',' << key.second << ','
          << format_double(a.first / static_cast<double>(a.second)) << ',' << a.second << '\n';
    }
    session.write_file(out_dir / "rank_probability.csv", csv.str());
  }
  {
    const auto grids = grid_mean_distance(trips, cfg.grid, cfg.parallel);
    std::ostringstream csv;
    csv << "col,row,class,mean_km,count\n";
    for (int cls = 0; cls < 2; ++cls) {
      for (const auto& [cell, st] : grids[cls]) {
        csv << cell.col << ',' << cell.row << ',' << trip_class_name(static_cast<TripClass>(cls))
            << ',' << format_double(st.mean_km()) << ',' << st.count << '\n';
      }
    }
    session.write_file(out_dir / "grid_mean_distance.csv", csv.str());
  }
  {
    // home/work centroid density per cell (plot-ready substitute for a heatmap)
    std::map<GridCell, std::array<std::int64_t, 2>> cells;
    for (const auto& u : users) {
      for (const auto& p : u.places) {
        if (p.function > 1) continue;
        if (const auto cell = grid_index(p.centroid, cfg.grid)) {
          ++cells[*cell][p.function];
        }
      }
    }
    std::ostringstream csv;
    csv << "col,row,home_count,work_count\n";
    for (const auto& [cell, counts] : cells) {
      csv << cell.col << ',' << cell.row << ',' << counts[0] << ',' << counts[1] << '\n';
    }
    session.write_file(out_dir / "home_work_cells.csv", csv.str());
  }
  {
    json report;
    std::array<std::int64_t, 2> class_counts{0, 0};
    std::array<double, 2> dist_sum{0, 0}, dur_sum{0, 0};
    for (const auto& t : trips) {
      const int cls = static_cast<int>(t.klass);
      ++class_counts[cls];
      dist_sum[cls] += t.base.distance_km;
      dur_sum[cls] += t.duration_min;
    }
    report["trips"] = {{"total", trips.size()},
                       {"commuting", class_counts[0]},
                       {"non_commuting", class_counts[1]}};
    report["mean_distance_km"] = {
        {"commuting", class_counts[0] ? dist_sum[0] / class_counts[0] : 0.0},
        {"non_commuting", class_counts[1] ? dist_sum[1] / class_counts[1] : 0.0}};
    report["mean_duration_min"] = {
        {"commuting", class_counts[0] ? dur_sum[0] / class_counts[0] : 0.0},
        {"non_commuting", class_counts[1] ? dur_sum[1] / class_counts[1] : 0.0}};
    report["window"] = {{"start", format_date(cfg.window.start_day)},
                        {"end", format_date(cfg.window.end_day)}};
    report["hourly_profile"] = {{"commuting", h.hourly_profile[0]},
                                {"non_commuting", h.hourly_profile[1]}};
    json pc;
    for (const auto& [k, v] : h.place_count_histogram) pc[std::to_string(k)] = v;
    report["place_count_histogram"] = std::move(pc);
    report["users"] = users.size();
    session.write_file(out_dir / "stats_report.json", report.dump(2) + "\n");
  }
}

std::string fit_rows_to_json_text(std::span<const FitRow> rows, const std::string& label,
                                  std::size_t n) {
  json j;
  j["label"] = label;
  j["n"] = n;
  auto& ranking = j["ranking"] = json::array();
  auto& failures = j["failures"] = json::array();
  for (const auto& row : rows) {
    if (row.ok) {
      json params;
      const auto names = param_names(row.model.family);
      for (std::size_t i = 0; i < names.size(); ++i) params[names[i]] = row.model.params[i];
      ranking.push_back({{"family", std::string(family_name(row.model.family))},
                         {"params", std::move(params)},
                         {"log_likelihood", row.model.log_likelihood},
                         {"ks_d", row.model.ks_d},
                         {"ks_p", row.model.ks_p}});
    } else {
      failures.push_back({{"family", std::string(family_name(row.model.family))},
                          {"error", row.error}});
    }
  }
  return j.dump(2) + "\n";
}

namespace {

void write_pdf_overlay_csv(const fs::path& path, std::span<const double> data,
                           std::span<const FitRow> rows, ArtifactSession& session) {
  const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  const double lo = *mn, hi = *mx;
  std::ostringstream csv;
  csv << "x";
  for (const auto& row : rows) {
    if (row.ok) csv << ',' << family_name(row.model.family);
  }
  csv << '\n';
  constexpr int kPoints = 256;
  for (int i = 0; i < kPoints; ++i) {
    const double x = lo + (hi - lo) * i / (kPoints - 1);
    csv << format_double(x);
    for (const auto& row : rows) {
      if (row.ok) csv << ',' << format_double(pdf(row.model.family, row.model.params, x));
    }
    csv << '\n';
  }
  session.write_file(path, csv.str());
}

}  // namespace

void stage_fit_column(const fs::path& column_file, const fs::path& out_json,
                      const std::optional<fs::path>& pdf_csv, const PipelineConfig& cfg,
                      ArtifactSession& session) {
  const std::vector<double> data = read_column_file(column_file);
  FitOptions opt;
  opt.parallel = cfg.parallel;
  const std::vector<FitRow> rows = fit_and_rank(data, cfg.fit_families, opt);
  session.write_file(out_json,
                     fit_rows_to_json_text(rows, column_file.filename().string(), data.size()));
  if (pdf_csv) write_pdf_overlay_csv(*pdf_csv, data, rows, session);
}

void stage_fit_classified(const fs::path& classified_csv, const fs::path& out_dir,
                          const PipelineConfig& cfg, ArtifactSession& session) {
  const std::vector<ClassifiedTrip> trips = parse_classified_csv(classified_csv, cfg);
  FitOptions opt;
  opt.parallel = cfg.parallel;
  for (int cls = 0; cls < 2; ++cls) {
    for (int metric = 0; metric < 2; ++metric) {
      std::vector<double> column;
      for (const auto& t : trips) {
        if (static_cast<int>(t.klass) != cls) continue;
        column.push_back(metric == 0 ? t.base.distance_km : t.duration_min);
      }
      const std::string label = std::string(trip_class_name(static_cast<TripClass>(cls))) +
                                (metric == 0 ? "_distance" : "_time");
      if (column.size() < 10) {
        throw DataError("fit: fewer than 10 " + label + " observations");
      }
      const std::vector<double> capped = subsample(column, cfg.fit_subsample);
      const std::vector<FitRow> rows = fit_and_rank(capped, cfg.fit_families, opt);
      session.write_file(out_dir / ("fit_" + label + ".json"),
                         fit_rows_to_json_text(rows, label, capped.size()));
    }
  }
}

void stage_synth(const SynthSpec& spec, std::uint64_t seed, const fs::path& out_csv,
                 const fs::path& truth_json, ArtifactSession& session, bool parallel) {
  auto [records, truth] = generate_population(spec, seed, parallel);
  std::ostringstream csv;
  write_records(csv, records);
  session.write_file(out_csv, csv.str());
  session.write_file(truth_json, truth_to_json_text(truth));
}

// ---- verify -----------------------------------------------------------------

namespace {

PipelineConfig config_for_spec(const SynthSpec& spec) {
  PipelineConfig cfg = default_pipeline_config();
  cfg.region = spec.region;
  cfg.grid = spec.grid;
  cfg.window = spec.window;
  cfg.parse.tz_offset_hours = spec.tz_offset_hours;
  cfg.miner.tz_offset_hours = spec.tz_offset_hours;
  cfg.miner.d_th_m = spec.d_th_m;
  return cfg;
}

double fit_param_error(const fs::path& fit_json, const DistributionSpec& truth) {
  std::ifstream in(fit_json);
  if (!in) throw DataError("cannot open " + fit_json.string());
  json j;
  in >> j;
  for (const auto& row : j.at("ranking")) {
    if (row.at("family").get<std::string>() != family_name(truth.family)) continue;
    const auto names = param_names(truth.family);
    double worst = 0.0;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double fitted = row.at("params").at(names[i]).get<double>();
      worst = std::max(worst, std::fabs(fitted - truth.params[i]) / std::fabs(truth.params[i]));
    }
    return worst;
  }
  return 1.0;  // planted family missing from the ranking counts as failure
}

}  // namespace

VerifyReport stage_verify(const SynthSpec& spec, std::uint64_t seed, const fs::path& out_dir,
                          ArtifactSession& session) {
  const PipelineConfig cfg = config_for_spec(spec);

  stage_synth(spec, seed, out_dir / kTripsCsv, out_dir / kTruthJson, session, cfg.parallel);
  stage_clean(out_dir / kTripsCsv, out_dir, cfg, session);
  stage_mine(out_dir / kCleanedCsv, out_dir, cfg, session);
  stage_classify(out_dir / kCleanedCsv, out_dir / kPlacesJson, out_dir, cfg, session);
  stage_stats(out_dir / kClassifiedCsv, out_dir / kPlacesJson, out_dir, cfg, session);
  stage_fit_classified(out_dir / kClassifiedCsv, out_dir, cfg, session);

  // compare against the planted truth
  std::ifstream tin(out_dir / kTruthJson);
  std::string ttext((std::istreambuf_iterator<char>(tin)), std::istreambuf_iterator<char>());
  const GroundTruth truth = truth_from_json_text(ttext);
  const std::vector<UserPlacesFile> mined = places_from_json_file(out_dir / kPlacesJson);
  std::map<std::string, const UserPlacesFile*> mined_by_id;
  for (const auto& u : mined) mined_by_id[u.p_id] = &u;

  const double match_radius = spec.d_th_m / 2.0;
  std::int64_t commuters = 0, home_ok = 0, work_ok = 0;
  std::int64_t place_users = 0, place_exact = 0;
  std::map<std::string, std::pair<bool, bool>> recovered;  // p_id -> (home, work)
  for (const auto& tu : truth.users) {
    const auto it = mined_by_id.find(tu.p_id);
    if (it == mined_by_id.end()) continue;
    const UserPlacesFile& u = *it->second;
    ++place_users;
    if (u.max_pid + 1 == static_cast<int>(tu.places.size())) ++place_exact;
    if (!tu.commuter) continue;
    ++commuters;
    bool h_ok = false, w_ok = false;
    for (const auto& p : u.places) {
      if (p.function == 0 && haversine_m(p.centroid, tu.home) <= match_radius) h_ok = true;
      if (p.function == 1 && haversine_m(p.centroid, tu.work) <= match_radius) w_ok = true;
    }
    home_ok += h_ok;
    work_ok += w_ok;
    recovered[tu.p_id] = {h_ok, w_ok};
  }

  // classification agreement on users whose home AND work were recovered
  std::map<std::string, const TruthUser*> truth_by_id;
  for (const auto& tu : truth.users) truth_by_id[tu.p_id] = &tu;
  const std::vector<ClassifiedTrip> classified =
      parse_classified_csv(out_dir / kClassifiedCsv, cfg);
  std::int64_t agree_total = 0, agree_ok = 0;
  for (const auto& t : classified) {
    const auto rec = recovered.find(t.base.p_id);
    if (rec == recovered.end() || !rec->second.first || !rec->second.second) continue;
    const TruthUser* tu = truth_by_id.at(t.base.p_id);
    const auto cls = tu->trip_classes.find(t.base.r_id);
    if (cls == tu->trip_classes.end()) continue;
    ++agree_total;
    agree_ok += cls->second == t.klass;
  }

  // cleaning must not reject anything the generator produced
  std::ifstream rin(out_dir / kCleaningReportJson);
  json jr;
  rin >> jr;
  const double rejected = jr.at("total_read").get<double>() - jr.at("retained").get<double>();

  double fit_err = 0.0;
  fit_err = std::max(fit_err, fit_param_error(out_dir / "fit_commuting_distance.json",
                                              spec.distance_model[0]));
  fit_err = std::max(fit_err, fit_param_error(out_dir / "fit_non_commuting_distance.json",
                                              spec.distance_model[1]));
  fit_err = std::max(fit_err, fit_param_error(out_dir / "fit_commuting_time.json",
                                              spec.duration_model[0]));
  fit_err = std::max(fit_err, fit_param_error(out_dir / "fit_non_commuting_time.json",
                                              spec.duration_model[1]));

  VerifyReport report;
  auto add_check = [&](const std::string& name, double value, double threshold,
                       bool at_least) {
    VerifyCheck c;
    c.name = name;
    c.value = value;
    c.threshold = threshold;
    c.at_least = at_least;
    c.pass = at_least ? value >= threshold : value <= threshold;
    report.checks.push_back(c);
  };
  add_check("home_recovery_rate", commuters ? static_cast<double>(home_ok) / commuters : 0.0,
            0.95, true);
  add_check("work_recovery_rate", commuters ? static_cast<double>(work_ok) / commuters : 0.0,
            0.90, true);
  add_check("classification_agreement",
            agree_total ? static_cast<double>(agree_ok) / agree_total : 0.0, 0.99, true);
  add_check("place_count_exact_rate",
            place_users ? static_cast<double>(place_exact) / place_users : 0.0, 1.0, true);
  add_check("max_fit_param_rel_error", fit_err, 0.05, false);
  add_check("cleaning_rejections", rejected, 0.0, false);
  report.pass = std::all_of(report.checks.begin(), report.checks.end(),
                            [](const VerifyCheck& c) { return c.pass; });

  json jrep;
  jrep["pass"] = report.pass;
  jrep["seed"] = seed;
  jrep["users"] = {{"total", truth.users.size()},
                   {"mined", place_users},
                   {"commuters", commuters}};
  auto& checks = jrep["checks"] = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"threshold", c.threshold},
                      {"op", c.at_least ? ">=" : "<="},
                      {"pass", c.pass}});
  }
  session.write_file(out_dir / kVerifyReportJson, jrep.dump(2) + "\n");
  return report;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::string& config_json, std::optional<std::uint64_t> seed,
                    const std::vector<std::string>& inputs, ArtifactSession& session) {
  json j;
  j["command"] = command;
  j["version"] = "0.1.0";
  j["config"] = json::parse(config_json);
  char hash[32];
  std::snprintf(hash, sizeof(hash), "fnv1a:%016llx",
                static_cast<unsigned long long>(fnv1a_hash(config_json)));
  j["config_hash"] = hash;
  if (seed) j["seed"] = *seed;
  j["inputs"] = inputs;
  session.write_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace mobmine
