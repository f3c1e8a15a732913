#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>

namespace avnode {

/// 2-D histogram of successive RR pairs on a fixed 31 x 31 grid of 50 ms bins
/// covering [250, 1800) ms on both axes.
struct PoincareHistogram {
  static constexpr double kLowMs = 250.0;
  static constexpr double kHighMs = 1800.0;
  static constexpr double kBinMs = 50.0;
  static constexpr int kSide = 31;
  static constexpr int kBins = kSide * kSide;

  /// Row-major: index = row * kSide + col, row from RR_n, col from RR_{n+1}.
  std::array<std::uint32_t, kBins> counts{};
  std::uint64_t total_pairs = 0;
  std::uint64_t discarded_pairs = 0;
  /// Duration of the source series (ms); the sum of its intervals by default.
  double duration_ms = 0.0;

  std::uint32_t at(int row, int col) const { return counts[static_cast<std::size_t>(row * kSide + col)]; }
};

static_assert(PoincareHistogram::kBins == 961);

/// Bin index of one RR value, or -1 when outside [250, 1800).
int poincare_bin(double rr_ms);

PoincareHistogram poincare_histogram(std::span<const double> rr);
PoincareHistogram poincare_histogram(std::span<const double> rr, double duration_ms);

/// Weighted squared histogram distance between an observed and a simulated
/// series:
///
///   eps = 1/K * sum_k (x_k - xs_k / t_norm)^2 / sqrt(max(x_k, 1))
///
/// with t_norm = duration(sim) / duration(obs). If either duration is not
/// positive t_norm is taken as 1.
double poincare_error(const PoincareHistogram& obs, const PoincareHistogram& sim);

/// Difference between the histograms of a segment and the following one.
double delta_p(const PoincareHistogram& current, const PoincareHistogram& next);

/// Writes the 31 x 31 count matrix as CSV, one histogram row per line.
void write_histogram_csv(std::ostream& os, const PoincareHistogram& h);

}  // namespace avnode
