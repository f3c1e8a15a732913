#include "avnode/av_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "avnode/error.hpp"

namespace avnode {

namespace {

constexpr int kChainLength = 10;
constexpr int kNumNodes = 2 * kChainLength + 1;
constexpr int kCoupling = 2 * kChainLength;
constexpr int kAtrium = -1;

struct Event {
  double t;
  std::int16_t target;
  std::int16_t source;
  std::uint32_t seq;
};

// Min-heap ordering on (t, target, source, seq).
struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.t != b.t) return a.t > b.t;
    if (a.target != b.target) return a.target > b.target;
    if (a.source != b.source) return a.source > b.source;
    return a.seq > b.seq;
  }
};

class PoissonClock {
 public:
  PoissonClock(double lambda_hz, std::uint64_t seed) : rng_(seed), rate_per_ms_(lambda_hz / 1000.0) {}

  double next() {
    // Inverse-CDF on 53-bit uniforms in [0, 1).
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    t_ += -std::log1p(-u) / rate_per_ms_;
    return t_;
  }

 private:
  std::mt19937_64 rng_;
  double rate_per_ms_;
  double t_ = 0.0;
};

bool is_fp(int node) { return node >= 0 && node < kChainLength; }

}  // namespace

double refractory(const PathwayParams& p, double t_tilde) {
  if (p.tau_r <= 0.0) return t_tilde > 0.0 ? p.r_min + p.delta_r : p.r_min;
  return p.r_min + p.delta_r * (1.0 - std::exp(-t_tilde / p.tau_r));
}

double delay(const PathwayParams& p, double t_tilde) {
  if (p.tau_d <= 0.0) return t_tilde > 0.0 ? p.d_min : p.d_min + p.delta_d;
  return p.d_min + p.delta_d * std::exp(-t_tilde / p.tau_d);
}

double coupling_rp_from_data(std::span<const double> rr) {
  constexpr std::size_t kCount = 10;
  if (rr.size() < kCount) {
    throw DataError("coupling RP needs at least 10 RR intervals, got " + std::to_string(rr.size()));
  }
  std::vector<double> v(rr.begin(), rr.end());
  std::partial_sort(v.begin(), v.begin() + kCount, v.end());
  return std::accumulate(v.begin(), v.begin() + kCount, 0.0) / static_cast<double>(kCount);
}

std::vector<double> atrial_arrivals(double lambda_hz, double duration_ms, std::uint64_t seed) {
  std::vector<double> out;
  if (!(lambda_hz > 0.0)) throw UsageError("atrial rate must be positive");
  PoissonClock clock(lambda_hz, seed);
  for (double t = clock.next(); t < duration_ms; t = clock.next()) out.push_back(t);
  return out;
}

SimulationResult simulate(const ModelParameters& theta, const CouplingConfig& coupling, double lambda_hz,
                          std::uint64_t seed, const SimulationOptions& options) {
  if (!(lambda_hz > 0.0)) throw UsageError("atrial rate must be positive");
  if (!(options.duration_ms > 0.0)) throw UsageError("simulation duration must be positive");

  SimulationResult result;
  if (options.track) result.tracked.emplace();

  std::array<double, kNumNodes> t_last;
  std::array<double, kNumNodes> r_last;
  t_last.fill(-std::numeric_limits<double>::infinity());
  r_last.fill(0.0);

  std::vector<Event> heap;
  heap.reserve(64);
  std::uint32_t seq = 0;
  const Later later;
  auto push = [&](double t, int target, int source) {
    heap.push_back({t, static_cast<std::int16_t>(target), static_cast<std::int16_t>(source), seq++});
    std::push_heap(heap.begin(), heap.end(), later);
  };

  const double end = options.duration_ms;
  PoissonClock clock(lambda_hz, seed);
  double next_atrial = clock.next();

  for (;;) {
    // Atrial impulses are merged lazily so the heap only holds in-flight events.
    // (t, node 0, atrium) precedes every heap event with the same timestamp.
    if (next_atrial < end && (heap.empty() || next_atrial <= heap.front().t)) {
      ++result.n_atrial;
      push(next_atrial, 0, kAtrium);
      push(next_atrial, kChainLength, kAtrium);
      next_atrial = clock.next();
    }
    if (heap.empty()) break;
    std::pop_heap(heap.begin(), heap.end(), later);
    const Event ev = heap.back();
    heap.pop_back();
    if (ev.t >= end) continue;

    const int node = ev.target;
    if (node == kCoupling) {
      if (ev.t < t_last[node] + r_last[node]) continue;
      t_last[node] = ev.t;
      r_last[node] = coupling.rp_ms;
      if (is_fp(ev.source)) {
        ++result.n_fp;
      } else {
        ++result.n_sp;
      }
      const double out = ev.t + coupling.cd_ms;
      result.ventricular_times.push_back(out);
      if (ev.source != kChainLength - 1) push(out, kChainLength - 1, node);
      if (ev.source != 2 * kChainLength - 1) push(out, 2 * kChainLength - 1, node);
      continue;
    }

    const double t_tilde = ev.t - (t_last[node] + r_last[node]);
    if (t_tilde < 0.0) continue;
    const bool fast = is_fp(node);
    const PathwayParams& p = fast ? theta.fp : theta.sp;
    const double r = refractory(p, t_tilde);
    const double d = delay(p, t_tilde);
    t_last[node] = ev.t;
    r_last[node] = r;
    if (result.tracked) {
      auto& tr = *result.tracked;
      (fast ? tr.r_fp : tr.r_sp).push_back(r);
      (fast ? tr.d_fp : tr.d_sp).push_back(d);
    }

    const int pos = fast ? node : node - kChainLength;
    const double out = ev.t + d;
    if (pos > 0 && ev.source != node - 1) push(out, node - 1, node);
    if (pos < kChainLength - 1) {
      if (ev.source != node + 1) push(out, node + 1, node);
    } else if (ev.source != kCoupling) {
      push(out, kCoupling, node);
    }
  }

  const auto& vt = result.ventricular_times;
  const std::size_t skip = static_cast<std::size_t>(std::max(options.warmup_intervals, 0));
  if (vt.size() > skip + 1) {
    result.rr_intervals.reserve(vt.size() - 1 - skip);
    for (std::size_t i = skip + 1; i < vt.size(); ++i) result.rr_intervals.push_back(vt[i] - vt[i - 1]);
  }
  return result;
}

}  // namespace avnode
