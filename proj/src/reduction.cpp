#include "avnode/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "avnode/error.hpp"
#include "avnode/parallel.hpp"

namespace avnode {

namespace {

constexpr int kGridPoints = 512;
constexpr double kGridPaddingBandwidths = 3.0;
// Above this size the KDE is evaluated from a linearly binned sample.
constexpr std::size_t kDirectKdeLimit = 20'000;
constexpr int kFineBins = 16'384;
constexpr double kKernelCutoff = 8.0;

double median_of(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace

std::string_view property_name(std::size_t index) {
  static constexpr std::array<std::string_view, kNumProperties> kNames = {"r_fp", "r_sp", "d_fp", "d_sp"};
  return kNames.at(index);
}

void PropertySamples::merge(const PropertySamples& other) {
  for (std::size_t p = 0; p < kNumProperties; ++p) {
    pools[p].insert(pools[p].end(), other.pools[p].begin(), other.pools[p].end());
  }
  n_fp += other.n_fp;
  n_sp += other.n_sp;
}

PropertySamples reduce(std::span<const Particle> particles, double lambda_hz, const CouplingConfig& coupling,
                       const SeedScope& seeds, const ReductionOptions& options) {
  std::vector<PropertySamples> parts(particles.size());
  SimulationOptions sim;
  sim.duration_ms = options.simulation_ms;
  sim.track = true;
  parallel_for(particles.size(), options.threads, [&](std::size_t i) {
    auto run = simulate(ModelParameters::from_array(particles[i].theta), coupling, lambda_hz,
                        seeds(Purpose::kReduction, i), sim);
    auto& tr = *run.tracked;
    auto& out = parts[i];
    out.pools = {std::move(tr.r_fp), std::move(tr.r_sp), std::move(tr.d_fp), std::move(tr.d_sp)};
    out.n_fp = run.n_fp;
    out.n_sp = run.n_sp;
  });
  PropertySamples pooled;
  for (std::size_t p = 0; p < kNumProperties; ++p) {
    std::size_t total = 0;
    for (const auto& part : parts) total += part.pools[p].size();
    pooled.pools[p].reserve(total);
  }
  for (auto& part : parts) {
    pooled.merge(part);
    part = {};
  }
  return pooled;
}

double kde_bandwidth(std::span<const double> samples) {
  const auto n = samples.size();
  if (n < 2) return 0.0;
  std::vector<double> v(samples.begin(), samples.end());
  const double med = median_of(v);
  for (double& x : v) x = std::abs(x - med);
  double sigma = median_of(std::move(v)) / 0.6745;
  if (!(sigma > 0.0)) {
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    sigma = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return sigma * std::pow(4.0 / (3.0 * static_cast<double>(n)), 0.2);
}

double kde_mode(std::span<const double> samples) {
  if (samples.empty()) throw DataError("KDE of an empty sample");
  const auto [min_it, max_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *min_it;
  const double hi = *max_it;
  if (samples.size() == 1 || lo == hi) return lo;
  const double h = kde_bandwidth(samples);
  if (!(h > 0.0)) return lo;

  const double g0 = lo - kGridPaddingBandwidths * h;
  const double g1 = hi + kGridPaddingBandwidths * h;
  const double step = (g1 - g0) / (kGridPoints - 1);
  std::vector<double> density(kGridPoints, 0.0);
  const double inv_h = 1.0 / h;

  if (samples.size() <= kDirectKdeLimit) {
    for (int g = 0; g < kGridPoints; ++g) {
      const double x = g0 + g * step;
      double s = 0.0;
      for (double v : samples) {
        const double z = (x - v) * inv_h;
        s += std::exp(-0.5 * z * z);
      }
      density[static_cast<std::size_t>(g)] = s;
    }
  } else {
    // Linear binning onto a fine grid over the same span.
    const double fine_step = (g1 - g0) / (kFineBins - 1);
    std::vector<double> mass(kFineBins, 0.0);
    for (double v : samples) {
      const double pos = (v - g0) / fine_step;
      const auto i = std::min(static_cast<int>(pos), kFineBins - 2);
      const double frac = pos - i;
      mass[static_cast<std::size_t>(i)] += 1.0 - frac;
      mass[static_cast<std::size_t>(i) + 1] += frac;
    }
    const int reach = static_cast<int>(std::ceil(kKernelCutoff * h / fine_step));
    for (int g = 0; g < kGridPoints; ++g) {
      const double x = g0 + g * step;
      const int centre = static_cast<int>(std::lround((x - g0) / fine_step));
      double s = 0.0;
      for (int m = std::max(0, centre - reach); m <= std::min(kFineBins - 1, centre + reach); ++m) {
        if (mass[static_cast<std::size_t>(m)] == 0.0) continue;
        const double z = (x - (g0 + m * fine_step)) * inv_h;
        s += mass[static_cast<std::size_t>(m)] * std::exp(-0.5 * z * z);
      }
      density[static_cast<std::size_t>(g)] = s;
    }
  }
  const auto best = std::max_element(density.begin(), density.end());
  const double mode = g0 + static_cast<double>(best - density.begin()) * step;
  return std::clamp(mode, lo, hi);
}

double quantile(std::span<const double> samples, double q) {
  if (samples.empty()) throw DataError("quantile of an empty sample");
  std::vector<double> v(samples.begin(), samples.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto k = static_cast<std::size_t>(std::floor(pos));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  const double a = v[k];
  if (k + 1 >= v.size()) return a;
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(k) + 1, v.end());
  return a + (pos - static_cast<double>(k)) * (b - a);
}

std::pair<double, double> percentiles(std::span<const double> samples) {
  return {quantile(samples, 0.05), quantile(samples, 0.95)};
}

std::optional<double> sp_ratio(long n_fp, long n_sp) {
  if (n_fp + n_sp <= 0) return std::nullopt;
  return static_cast<double>(n_sp) / static_cast<double>(n_fp + n_sp);
}

PropertySummary summarize(const PropertySamples& samples) {
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  PropertySummary s;
  for (std::size_t p = 0; p < kNumProperties; ++p) {
    const auto& pool = samples.pools[p];
    s.sample_counts[p] = pool.size();
    if (pool.empty()) {
      s.phi_max[p] = s.phi_5[p] = s.phi_95[p] = kNaN;
      continue;
    }
    s.phi_max[p] = kde_mode(pool);
    std::tie(s.phi_5[p], s.phi_95[p]) = percentiles(pool);
  }
  s.n_fp = samples.n_fp;
  s.n_sp = samples.n_sp;
  s.sp_ratio = sp_ratio(samples.n_fp, samples.n_sp);
  return s;
}

std::vector<double> subsample(std::span<const double> values, std::size_t cap, std::uint64_t seed) {
  if (values.size() <= cap) return {values.begin(), values.end()};
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<double> out;
  out.reserve(cap);
  for (auto i : idx) out.push_back(values[i]);
  return out;
}

}  // namespace avnode
