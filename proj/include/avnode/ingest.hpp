#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace avnode {

inline constexpr double kMinuteMs = 60'000.0;
inline constexpr double kSegmentMs = 600'000.0;
inline constexpr double kSegmentStepMs = 300'000.0;
inline constexpr int kMinBeatsPerMinute = 20;
inline constexpr double kMinPatientCoverageMs = 12.0 * 3600.0 * 1000.0;

/// Detected beats of one recording.
struct BeatSeries {
  std::string patient_id;
  /// Strictly increasing, ms since recording start.
  std::vector<double> beat_times;
  /// One flag per interval; false when either bounding beat has deviating
  /// morphology.
  std::vector<bool> valid_flags;
  /// Time of day at recording start, seconds after midnight.
  double start_clock_s = 8.0 * 3600.0;

  std::size_t interval_count() const { return beat_times.empty() ? 0 : beat_times.size() - 1; }
  /// All valid RR intervals of the recording.
  std::vector<double> valid_intervals() const;
};

/// Per-minute atrial fibrillatory rate, stored in Hz. Minutes without an
/// estimate are simply absent.
struct AfrTrend {
  std::vector<int> minutes;
  std::vector<double> afr_hz;

  bool empty() const { return minutes.empty(); }
  /// Observed value at `minute`, or the nearest observed one (earlier on ties).
  double nearest(int minute) const;
};

/// One 10-minute analysis window.
struct RRSegment {
  std::string patient_id;
  int index = 0;
  double start_ms = 0.0;
  std::vector<double> rr_intervals;
  std::size_t n_beats = 0;
  /// Mean atrial rate over the window (Hz); NaN until attach_afr.
  double lambda_hat = 0.0;
  /// Time of day of the window start, seconds after midnight, in [0, 86400).
  double wall_clock_start_s = 0.0;

  double end_ms() const { return start_ms + kSegmentMs; }
};

/// Parses `t_ms,valid` beat CSV. Leading `#` lines are comments; a comment of
/// the form `# start_time=HH:MM[:SS]` sets the recording's time of day.
/// Throws DataError naming the offending line.
BeatSeries parse_beats(std::istream& in, std::string patient_id);
BeatSeries parse_beats(const std::filesystem::path& file, std::string patient_id);

/// Parses `minute,afr_hz` or `minute,afr_per_min` CSV; empty, `NA` or `nan`
/// values mark a missing minute. Per-minute rates are converted to Hz.
AfrTrend parse_afr(std::istream& in);
AfrTrend parse_afr(const std::filesystem::path& file);

/// Overlapping 10-minute windows every 5 minutes. A window is dropped when
/// any of its ten minutes holds fewer than 20 detected beats. Invalid
/// intervals are removed from `rr_intervals` but their beats still count.
std::vector<RRSegment> segment(const BeatSeries& beats);

/// True when the included windows jointly cover at least 12 hours.
bool check_patient_duration(std::span<const RRSegment> segments);

/// Total time covered by the union of the windows (ms).
double covered_duration_ms(std::span<const RRSegment> segments);

/// Sets lambda_hat to the mean AFR over each window's ten minutes, filling
/// missing minutes with the nearest observation. Throws DataError on an
/// empty trend.
std::vector<RRSegment> attach_afr(std::vector<RRSegment> segments, const AfrTrend& trend);

/// One JSON object per line: patient, s, start, n_beats, lambda_hat.
void write_segment_manifest(std::ostream& os, std::span<const RRSegment> segments);

/// "HH:MM[:SS]" to seconds after midnight. Throws DataError.
double parse_clock(const std::string& text);

}  // namespace avnode
