#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "avnode/av_model.hpp"
#include "avnode/ingest.hpp"
#include "avnode/params.hpp"

namespace avnode {

/// Ground-truth generator for a synthetic patient.
struct SyntheticSpec {
  struct ThetaChange {
    double start_hour = 0.0;
    ModelParameters theta;
  };
  struct LambdaChange {
    double start_hour = 0.0;
    double lambda_hz = 0.0;
  };

  std::string patient_id = "synthetic";
  double duration_hours = 24.0;
  double start_clock_s = 8.0 * 3600.0;
  CouplingConfig coupling{350.0, 60.0};
  ModelParameters theta;
  std::vector<ThetaChange> theta_schedule;
  double lambda_hz = 7.0;
  std::vector<LambdaChange> lambda_schedule;
  /// Piecewise-constant jitter: every `jitter_period_hours` each coordinate
  /// is offset by U(-f, f) times its GA range (f = jitter_fraction), then
  /// clamped to the ABC bounds.
  double jitter_fraction = 0.0;
  double jitter_period_hours = 1.0;
  double invalid_beat_fraction = 0.0;
  double afr_missing_fraction = 0.0;
  double afr_noise_hz = 0.0;

  /// Throws UsageError for non-positive durations or out-of-bounds values.
  void validate() const;

  static SyntheticSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// A constant-parameter stretch of the synthetic recording.
struct SyntheticPiece {
  double start_ms = 0.0;
  double end_ms = 0.0;
  ModelParameters theta;
  double lambda_hz = 0.0;
};

struct SyntheticRecording {
  BeatSeries beats;
  /// Per-beat morphology flag as written to the RR file.
  std::vector<bool> beat_valid;
  AfrTrend afr;
  std::vector<SyntheticPiece> pieces;
};

/// Simulates the recording piece by piece. Beats closer than the coupling RP
/// to the previous piece's last beat are dropped at piece boundaries.
SyntheticRecording synthesize(const SyntheticSpec& spec, std::uint64_t seed);

struct SyntheticFiles {
  std::filesystem::path rr;
  std::filesystem::path afr;
  std::filesystem::path truth;
};

/// Writes `<patient>_rr.csv`, `<patient>_afr.csv` and `<patient>_truth.json`.
SyntheticFiles write_synthetic(const SyntheticSpec& spec, const SyntheticRecording& rec, std::uint64_t seed,
                               const std::filesystem::path& out_dir);

nlohmann::json theta_to_json(const ModelParameters& theta);
ModelParameters theta_from_json(const nlohmann::json& j);

}  // namespace avnode
