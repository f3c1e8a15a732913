#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avnode/reduction.hpp"

namespace avnode {

using PropertyArray = std::array<double, kNumProperties>;

/// One estimated segment in a patient's trend.
struct TrendPoint {
  int index = 0;
  double start_ms = 0.0;
  /// Time of day of the segment start, seconds after midnight.
  double clock_s = 0.0;
  PropertySummary summary;
  /// Property samples (possibly subsampled) for KS distances.
  std::array<std::vector<double>, kNumProperties> samples;
};

struct TrendSeries {
  std::string patient_id;
  /// Ordered by start time.
  std::vector<TrendPoint> points;
};

/// Day window [09:00, 21:00) and night window [02:00, 06:00), by segment start.
bool is_daytime(double clock_s);
bool is_nighttime(double clock_s);

/// Componentwise ratio of the mean daytime phi_max to the mean nighttime
/// phi_max. Unset if either window has no segment.
std::optional<PropertyArray> diurnal_variability(const TrendSeries& series);

/// Two-sample Kolmogorov-Smirnov statistic: sup |F_a - F_b|.
double ks_distance(std::span<const double> a, std::span<const double> b);

/// Segments whose start falls in the 24 h window beginning at the last 08:00
/// at or before the recording start.
std::vector<const TrendPoint*> ks_window(const TrendSeries& series);

/// Mean KS distance between consecutive segments (index step 1) inside the
/// 24 h window, per property. Unset when there is no such pair.
std::optional<PropertyArray> short_term_variability(const TrendSeries& series);

struct SpearmanResult {
  /// Unset when either argument is constant or fewer than 3 pairs remain.
  std::optional<double> rho;
  /// Two-sided p-value from the t approximation with n - 2 degrees of freedom.
  std::optional<double> p_value;
  std::size_t n = 0;
};

/// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> v);

/// Spearman rank correlation; pairs where either value is NaN are dropped.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

/// Per-patient aggregates feeding the cohort table.
struct PatientMetrics {
  std::string patient_id;
  std::size_t n_segments = 0;
  PropertyArray phi_max_24h{}, phi_max_day{}, phi_max_night{};
  PropertyArray width_24h{}, width_day{}, width_night{};
  std::optional<PropertyArray> delta_dv;
  std::optional<PropertyArray> mean_delta_ks;
  double sp_ratio_24h = 0.0, sp_ratio_day = 0.0, sp_ratio_night = 0.0;
};

PatientMetrics patient_metrics(const TrendSeries& series);

struct CohortRow {
  std::string metric;
  PropertyArray mean{};
  PropertyArray sd{};
  /// Factor applied to the two conduction delay columns.
  double cd_scale = 1.0;
  std::size_t n = 0;
};

/// Mean and sample std over patients (std 0 for one patient) of each
/// per-patient aggregate. Conduction delay columns are scaled by 10 (total
/// delay over a pathway) for the phi_max and width rows. Missing values are
/// skipped per metric.
std::vector<CohortRow> cohort_table(std::span<const PatientMetrics> patients);

/// Conduction delay over a whole 10-node pathway.
inline constexpr double kTotalDelayFactor = 10.0;

void write_patient_metrics_csv(std::ostream& os, std::span<const PatientMetrics> patients);
void write_cohort_csv(std::ostream& os, std::span<const CohortRow> rows);

}  // namespace avnode
