#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "avnode/abc.hpp"
#include "avnode/av_model.hpp"
#include "avnode/seeds.hpp"

namespace avnode {

/// Order of the four AV-node properties everywhere in this library.
enum class Property : int { kRFp = 0, kRSp = 1, kDFp = 2, kDSp = 3 };
inline constexpr std::size_t kNumProperties = 4;

std::string_view property_name(std::size_t index);

/// Per-activation RP/CD samples pooled over all posterior simulations.
struct PropertySamples {
  std::array<std::vector<double>, kNumProperties> pools;
  long n_fp = 0;
  long n_sp = 0;

  const std::vector<double>& operator[](Property p) const { return pools[static_cast<std::size_t>(p)]; }
  /// Appends another pool; associative, order-preserving.
  void merge(const PropertySamples& other);
};

struct PropertySummary {
  std::array<double, kNumProperties> phi_max{};
  std::array<double, kNumProperties> phi_5{};
  std::array<double, kNumProperties> phi_95{};
  /// Unset when neither pathway reached the coupling node.
  std::optional<double> sp_ratio;
  long n_fp = 0;
  long n_sp = 0;
  std::array<std::size_t, kNumProperties> sample_counts{};
};

struct ReductionOptions {
  double simulation_ms = 600'000.0;
  int threads = 1;
};

/// One tracked simulation per particle at the segment's atrial rate;
/// particle i uses seeds(Purpose::kReduction, i). Samples are pooled in
/// particle order.
PropertySamples reduce(std::span<const Particle> particles, double lambda_hz, const CouplingConfig& coupling,
                       const SeedScope& seeds, const ReductionOptions& options = {});

/// Normal-reference bandwidth h = sigma * (4 / (3n))^(1/5) with the robust
/// scale sigma = MAD / 0.6745 (falling back to the standard deviation when
/// the MAD is zero).
double kde_bandwidth(std::span<const double> samples);

/// Mode of a Gaussian KDE evaluated on a 512-point grid spanning
/// [min - 3h, max + 3h]; ties resolve to the lowest grid value. Throws
/// DataError on an empty sample; a single sample is returned as is.
double kde_mode(std::span<const double> samples);

/// 5th and 95th percentiles, linear interpolation between order statistics.
std::pair<double, double> percentiles(std::span<const double> samples);

/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::span<const double> samples, double q);

/// n_sp / (n_fp + n_sp); unset when both are zero.
std::optional<double> sp_ratio(long n_fp, long n_sp);

/// KDE modes, percentiles and SP ratio of a pooled sample. Properties with
/// no samples are reported as NaN.
PropertySummary summarize(const PropertySamples& samples);

/// Uniform subsample without replacement of at most `cap` values, order
/// preserved; deterministic for a seed.
std::vector<double> subsample(std::span<const double> values, std::size_t cap, std::uint64_t seed);

}  // namespace avnode
