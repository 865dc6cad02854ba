#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mobmine/fit.hpp"
#include "mobmine/places.hpp"
#include "mobmine/semantics.hpp"
#include "mobmine/synth.hpp"
#include "mobmine/trip.hpp"

namespace mobmine {

// Merged configuration for the file-based pipeline stages.
struct PipelineConfig {
  Region region;
  GridSpec grid;
  ParseOptions parse;
  CleanOptions cleaning;
  MinerConfig miner;
  int min_monthly_trips = 10;
  FrequencyMode frequency_mode = FrequencyMode::per_month_strict;
  DateWindow window;  // defaults to 2017-03-01 .. 2017-06-30
  std::vector<Family> fit_families{kAllFamilies.begin(), kAllFamilies.end()};
  std::size_t fit_subsample = 10000;  // 0 = no cap
  double gap_bin_min = 10.0;
  double gap_max_min = 45000.0;
  bool parallel = true;
};

PipelineConfig default_pipeline_config();
PipelineConfig pipeline_config_from_json_text(const std::string& text);
std::string pipeline_config_to_json_text(const PipelineConfig& cfg);
std::uint64_t fnv1a_hash(std::string_view text);

// Records every file it writes so a failed run can remove its partial
// artifacts.
class ArtifactSession {
public:
  void write_file(const std::filesystem::path& path, const std::string& content);
  void discard_all();  // unlink everything written so far
  const std::vector<std::filesystem::path>& written() const { return written_; }

private:
  std::vector<std::filesystem::path> written_;
};

// ---- stages; each writes its artifacts into out_dir --------------------

// cleaned.csv + cleaning_report.json
CleaningReport stage_clean(const std::filesystem::path& input_csv,
                           const std::filesystem::path& out_dir, const PipelineConfig& cfg,
                           ArtifactSession& session);

// places.json (frequent users only)
void stage_mine(const std::filesystem::path& cleaned_csv,
                const std::filesystem::path& out_dir, const PipelineConfig& cfg,
                ArtifactSession& session);

// classified.csv for every user present in places.json
void stage_classify(const std::filesystem::path& cleaned_csv,
                    const std::filesystem::path& places_json,
                    const std::filesystem::path& out_dir, const PipelineConfig& cfg,
                    ArtifactSession& session);

// histogram/grid CSVs + stats_report.json
void stage_stats(const std::filesystem::path& classified_csv,
                 const std::filesystem::path& places_json,
                 const std::filesystem::path& out_dir, const PipelineConfig& cfg,
                 ArtifactSession& session);

// four Table-2/3-style rankings from the classified trips
void stage_fit_classified(const std::filesystem::path& classified_csv,
                          const std::filesystem::path& out_dir, const PipelineConfig& cfg,
                          ArtifactSession& session);

// single-column input -> one ranking JSON (+ optional pdf-overlay CSV)
void stage_fit_column(const std::filesystem::path& column_file,
                      const std::filesystem::path& out_json,
                      const std::optional<std::filesystem::path>& pdf_csv,
                      const PipelineConfig& cfg, ArtifactSession& session);

// trips.csv + truth.json
void stage_synth(const SynthSpec& spec, std::uint64_t seed,
                 const std::filesystem::path& out_csv,
                 const std::filesystem::path& truth_json, ArtifactSession& session,
                 bool parallel = true);

struct VerifyCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool at_least = true;  // false: value must be <= threshold
  bool pass = false;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool pass = false;
};

// synth -> clean -> mine -> classify -> stats -> fit, then compares the
// results against the planted truth and writes verify_report.json.
VerifyReport stage_verify(const SynthSpec& spec, std::uint64_t seed,
                          const std::filesystem::path& out_dir, ArtifactSession& session);

// manifest written once per CLI run; content is free of timestamps so equal
// runs stay byte-identical
void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                    const std::string& config_json, std::optional<std::uint64_t> seed,
                    const std::vector<std::string>& inputs, ArtifactSession& session);

// ---- helpers shared with tests -----------------------------------------

struct PlaceFileRecord {
  int pid = 0;
  int function = 2;  // 0 home, 1 work, 2 other
  double support_ratio = 0.0;
  int member_count = 0;
  GeoPoint centroid;
};

struct UserPlacesFile {
  std::string p_id;
  int max_pid = -1;
  std::vector<int> origin_pids;
  std::vector<int> dest_pids;
  std::vector<PlaceFileRecord> places;
};

std::string places_to_json_text(std::span<const UserPlaces> users);
std::vector<UserPlacesFile> places_from_json_file(const std::filesystem::path& path);

void write_classified_csv(std::ostream& out, std::span<const ClassifiedTrip> trips);
std::vector<ClassifiedTrip> parse_classified_csv(const std::filesystem::path& path,
                                                 const PipelineConfig& cfg);

std::vector<double> read_column_file(const std::filesystem::path& path);

std::string fit_rows_to_json_text(std::span<const FitRow> rows, const std::string& label,
                                  std::size_t n);

inline const char* kCleanedCsv = "cleaned.csv";
inline const char* kCleaningReportJson = "cleaning_report.json";
inline const char* kPlacesJson = "places.json";
inline const char* kClassifiedCsv = "classified.csv";
inline const char* kTripsCsv = "trips.csv";
inline const char* kTruthJson = "truth.json";
inline const char* kVerifyReportJson = "verify_report.json";

}  // namespace mobmine
