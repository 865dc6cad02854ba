// mobmine -- trip-mobility mining pipeline.
//
// Subcommands: clean, mine-places, classify, stats, fit, synth, verify.
// Every stage stages its artifacts through files, so runs compose and
// restart cheaply. Exit codes: 0 ok, 1 usage, 2 data, 3 fit, 4 verify.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mobmine/errors.hpp"
#include "mobmine/pipeline.hpp"
#include "mobmine/timeutil.hpp"

namespace fs = std::filesystem;
using namespace mobmine;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string region_config;
  std::string out_dir = ".";
  bool serial = false;
};

PipelineConfig build_config(const CommonOpts& c) {
  PipelineConfig cfg = default_pipeline_config();
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw UsageError("cannot open --config " + c.config_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    cfg = pipeline_config_from_json_text(text);
  }
  if (!c.region_config.empty()) {
    const GeoConfig gc = load_geo_config(c.region_config);
    cfg.region = gc.region;
    cfg.grid = gc.grid;
  }
  if (c.serial) cfg.parallel = false;
  return cfg;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir);
}

int parse_window_flag(const std::string& s, int& begin, int& end) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) return 1;
  try {
    begin = std::stoi(s.substr(0, dash));
    end = std::stoi(s.substr(dash + 1));
  } catch (...) {
    return 1;
  }
  return (begin < 0 || end > 24 || begin >= end) ? 1 : 0;
}

void emit_error_json(int code, const std::string& kind, const std::string& message) {
  nlohmann::json j;
  j["error"] = {{"exit_code", code}, {"kind", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trip-mobility mining toolkit"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string input, places_path, classified_path, column_path, pdf_csv;
  std::string window_start, window_end, morning_flag, evening_flag;
  std::string spec_path, out_path = "trips.csv", truth_out = "truth.json";
  std::optional<std::uint64_t> seed;
  double speed_cap = -1, dth = -1, ratio = -1;
  int min_monthly = -1;
  bool convert_gcj02 = false, no_strict_origin = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "pipeline config JSON");
    cmd->add_option("--region-config", common.region_config, "region/grid config JSON");
    cmd->add_option("--out-dir", common.out_dir, "output directory");
    cmd->add_flag("--serial", common.serial, "disable OpenMP kernels");
  };

  CLI::App* clean_cmd = app.add_subcommand("clean", "parse and clean raw trip records");
  clean_cmd->add_option("input", input, "raw trips CSV")->required();
  clean_cmd->add_option("--speed-cap", speed_cap, "km/h cap (default 120)");
  clean_cmd->add_flag("--convert-gcj02", convert_gcj02, "convert endpoints from GCJ-02");
  add_common(clean_cmd);

  CLI::App* mine_cmd = app.add_subcommand("mine-places", "label endpoints with place IDs");
  mine_cmd->add_option("input", input, "cleaned trips CSV")->required();
  mine_cmd->add_option("--dth-meters", dth, "same-place threshold (default 500)");
  mine_cmd->add_option("--ratio-threshold", ratio, "home/work support ratio (default 0.40)");
  mine_cmd->add_option("--morning-window", morning_flag, "e.g. 6-11");
  mine_cmd->add_option("--evening-window", evening_flag, "e.g. 15-20");
  mine_cmd->add_flag("--no-strict-alg1-origin-first", no_strict_origin,
                     "disable own-origin precedence for destinations");
  mine_cmd->add_option("--min-monthly-trips", min_monthly, "frequent-user cutoff (default 10)");
  mine_cmd->add_option("--window-start", window_start, "YYYY-MM-DD");
  mine_cmd->add_option("--window-end", window_end, "YYYY-MM-DD");
  add_common(mine_cmd);

  CLI::App* classify_cmd = app.add_subcommand("classify", "split commuting/non-commuting");
  classify_cmd->add_option("input", input, "cleaned trips CSV")->required();
  classify_cmd->add_option("--places", places_path, "places.json from mine-places")->required();
  add_common(classify_cmd);

  CLI::App* stats_cmd = app.add_subcommand("stats", "temporal and spatial statistics");
  stats_cmd->add_option("input", classified_path, "classified trips CSV")->required();
  stats_cmd->add_option("--places", places_path, "places.json from mine-places")->required();
  stats_cmd->add_option("--window-start", window_start, "YYYY-MM-DD");
  stats_cmd->add_option("--window-end", window_end, "YYYY-MM-DD");
  add_common(stats_cmd);

  CLI::App* fit_cmd = app.add_subcommand("fit", "distribution fits with K-S ranking");
  fit_cmd->add_option("--input", column_path, "single-column numeric file");
  fit_cmd->add_option("--classified", classified_path, "classified trips CSV");
  fit_cmd->add_option("--pdf-csv", pdf_csv, "also write fitted-pdf overlay CSV");
  add_common(fit_cmd);

  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic population");
  synth_cmd->add_option("--spec", spec_path, "synth spec JSON (omit for defaults)");
  synth_cmd->add_option("--out", out_path, "output trips CSV");
  synth_cmd->add_option("--truth-out", truth_out, "ground-truth JSON");
  synth_cmd->add_option("--seed", seed, "generator seed (required)");
  add_common(synth_cmd);

  CLI::App* verify_cmd =
      app.add_subcommand("verify", "synth -> full pipeline -> planted-truth comparison");
  verify_cmd->add_option("--spec", spec_path, "synth spec JSON (omit for defaults)");
  verify_cmd->add_option("--seed", seed, "generator seed (required)");
  add_common(verify_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    emit_error_json(1, "usage", e.what());
    return 1;
  }

  ArtifactSession session;
  try {
    PipelineConfig cfg = build_config(common);
    ensure_out_dir(common.out_dir);
    const fs::path out_dir = common.out_dir;

    if (!window_start.empty()) {
      const auto d = parse_date(window_start);
      if (!d) throw UsageError("bad --window-start");
      cfg.window.start_day = *d;
    }
    if (!window_end.empty()) {
      const auto d = parse_date(window_end);
      if (!d) throw UsageError("bad --window-end");
      cfg.window.end_day = *d;
    }

    if (*clean_cmd) {
      if (speed_cap > 0) cfg.cleaning.speed_cap_kmh = speed_cap;
      if (convert_gcj02) cfg.cleaning.convert_gcj02 = true;
      const CleaningReport report = stage_clean(input, out_dir, cfg, session);
      write_manifest(out_dir, "clean", pipeline_config_to_json_text(cfg), std::nullopt,
                     {fs::path(input).filename().string()}, session);
      std::printf("clean: %llu read, %llu retained\n",
                  static_cast<unsigned long long>(report.total_read),
                  static_cast<unsigned long long>(report.retained));
    } else if (*mine_cmd) {
      if (dth > 0) cfg.miner.d_th_m = dth;
      if (ratio > 0) cfg.miner.home_work_ratio = ratio;
      if (min_monthly >= 0) cfg.min_monthly_trips = min_monthly;
      if (!morning_flag.empty() &&
          parse_window_flag(morning_flag, cfg.miner.morning_begin, cfg.miner.morning_end)) {
        throw UsageError("bad --morning-window, expected H-H");
      }
      if (!evening_flag.empty() &&
          parse_window_flag(evening_flag, cfg.miner.evening_begin, cfg.miner.evening_end)) {
        throw UsageError("bad --evening-window, expected H-H");
      }
      if (no_strict_origin) cfg.miner.strict_alg1_origin_first = false;
      stage_mine(input, out_dir, cfg, session);
      write_manifest(out_dir, "mine-places", pipeline_config_to_json_text(cfg), std::nullopt,
                     {fs::path(input).filename().string()}, session);
    } else if (*classify_cmd) {
      stage_classify(input, places_path, out_dir, cfg, session);
      write_manifest(out_dir, "classify", pipeline_config_to_json_text(cfg), std::nullopt,
                     {fs::path(input).filename().string(),
                      fs::path(places_path).filename().string()},
                     session);
    } else if (*stats_cmd) {
      stage_stats(classified_path, places_path, out_dir, cfg, session);
      write_manifest(out_dir, "stats", pipeline_config_to_json_text(cfg), std::nullopt,
                     {fs::path(classified_path).filename().string(),
                      fs::path(places_path).filename().string()},
                     session);
    } else if (*fit_cmd) {
      if (column_path.empty() == classified_path.empty()) {
        throw UsageError("fit: pass exactly one of --input or --classified");
      }
      if (!column_path.empty()) {
        const std::optional<fs::path> overlay =
            pdf_csv.empty() ? std::nullopt : std::optional<fs::path>(out_dir / pdf_csv);
        stage_fit_column(column_path, out_dir / "fit_ranking.json", overlay, cfg, session);
        write_manifest(out_dir, "fit", pipeline_config_to_json_text(cfg), std::nullopt,
                       {fs::path(column_path).filename().string()}, session);
      } else {
        stage_fit_classified(classified_path, out_dir, cfg, session);
        write_manifest(out_dir, "fit", pipeline_config_to_json_text(cfg), std::nullopt,
                       {fs::path(classified_path).filename().string()}, session);
      }
    } else if (*synth_cmd) {
      if (!seed) throw UsageError("synth: --seed is required");
      const SynthSpec spec =
          spec_path.empty() ? default_synth_spec() : load_synth_spec(spec_path);
      stage_synth(spec, *seed, out_dir / out_path, out_dir / truth_out, session,
                  !common.serial);
      write_manifest(out_dir, "synth", synth_spec_to_json_text(spec), seed,
                     spec_path.empty() ? std::vector<std::string>{"<default spec>"}
                                       : std::vector<std::string>{spec_path},
                     session);
    } else if (*verify_cmd) {
      if (!seed) throw UsageError("verify: --seed is required");
      SynthSpec spec = spec_path.empty() ? default_synth_spec() : load_synth_spec(spec_path);
      const VerifyReport report = stage_verify(spec, *seed, out_dir, session);
      write_manifest(out_dir, "verify", synth_spec_to_json_text(spec), seed,
                     spec_path.empty() ? std::vector<std::string>{"<default spec>"}
                                       : std::vector<std::string>{spec_path},
                     session);
      for (const auto& c : report.checks) {
        std::printf("%-28s %10.6f %s %.6f  [%s]\n", c.name.c_str(), c.value,
                    c.at_least ? ">=" : "<=", c.threshold, c.pass ? "pass" : "FAIL");
      }
      if (!report.pass) {
        emit_error_json(4, "verify", "verification checks failed");
        return 4;
      }
      std::printf("verify: all checks passed\n");
    }
  } catch (const UsageError& e) {
    session.discard_all();
    emit_error_json(e.exit_code(), "usage", e.what());
    return e.exit_code();
  } catch (const FitFailure& e) {
    session.discard_all();
    emit_error_json(e.exit_code(), "fit", e.what());
    return e.exit_code();
  } catch (const Error& e) {
    session.discard_all();
    const char* kind = e.kind() == ErrorKind::fit      ? "fit"
                       : e.kind() == ErrorKind::verify ? "verify"
                                                       : "data";
    emit_error_json(e.exit_code(), kind, e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    session.discard_all();
    emit_error_json(2, "data", e.what());
    return 2;
  }
  return 0;
}
