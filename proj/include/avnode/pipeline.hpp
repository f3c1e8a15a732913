#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "avnode/abc.hpp"
#include "avnode/ga.hpp"
#include "avnode/ingest.hpp"
#include "avnode/reduction.hpp"
#include "avnode/trends.hpp"

namespace avnode {

struct PatientInput {
  std::string id;
  std::filesystem::path rr;
  std::filesystem::path afr;
};

/// Everything a batch run depends on. Defaults are the full-scale settings:
/// 300 GA individuals, 100 particles, 8 ABC iterations.
struct PipelineConfig {
  std::vector<PatientInput> patients;
  std::filesystem::path outcomes;
  std::filesystem::path output_dir = "avnode_out";
  std::uint64_t root_seed = 1;
  int threads = 0;
  GaConfig ga;
  AbcSchedule abc;
  ReductionOptions reduction;
  double coupling_cd_ms = 60.0;
  /// Per-property KS subsample cap per segment.
  std::size_t ks_cap = 10'000;
  /// Estimate at most this many included segments per patient (0 = all).
  int max_segments = 0;
  /// When non-empty, only windows with these grid indices are estimated
  /// (applied before max_segments).
  std::vector<int> segment_indices;
  /// Write every pooled property sample, not just the KS subsample.
  bool dump_samples = false;

  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& file);
  nlohmann::json to_json() const;
  /// FNV-1a of the result-determining settings (paths and thread count excluded).
  std::string hash() const;
};

/// Applies the AVNODE_OUTPUT_DIR environment override, if set.
void apply_env_overrides(PipelineConfig& config);

struct IngestedPatient {
  BeatSeries beats;
  std::vector<RRSegment> segments;
  bool accepted = false;
  double covered_ms = 0.0;
  CouplingConfig coupling;
};

/// Parse, segment, attach AFR, apply the 12-hour rule and derive the
/// coupling RP from the valid intervals of the whole recording.
IngestedPatient ingest_patient(const PatientInput& input, double coupling_cd_ms);

/// Writes `<out>/<patient>/segments.jsonl` for every patient.
void run_ingest(const PipelineConfig& config, std::ostream& log);

struct EstimateSummary {
  int patients_accepted = 0;
  int patients_rejected = 0;
  int segments_estimated = 0;
  int segments_failed = 0;
  int segments_skipped = 0;
};

/// ingest -> GA -> ABC -> reduction for every patient. Resumable: segments
/// with existing outputs are not recomputed. Throws DataError before any
/// compute if an input file is missing.
EstimateSummary run_estimate(const PipelineConfig& config, std::ostream& log);

/// Recomputes property records from existing posterior files.
void run_reduce(const PipelineConfig& config, std::ostream& log);

/// Loads one patient's estimated trend from its output directory.
TrendSeries load_trend(const std::filesystem::path& patient_dir, const std::string& patient_id);

struct OutcomeTable {
  std::vector<std::string> names;
  /// patient -> values (NaN when missing), aligned with `names`.
  std::vector<std::pair<std::string, std::vector<double>>> rows;
};

/// `patient,<outcome>...` CSV; empty cells or NA are missing values.
OutcomeTable parse_outcomes(std::istream& in);

/// Writes patient_metrics.csv, cohort_summary.csv and correlations.csv.
/// Throws DataError when no patient has estimated segments.
void run_trends(const PipelineConfig& config, std::ostream& log);

/// Human-readable run summary.
void run_report(const PipelineConfig& config, std::ostream& out);

}  // namespace avnode
