#include "avnode/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace avnode {

int poincare_bin(double rr_ms) {
  using H = PoincareHistogram;
  if (!(rr_ms >= H::kLowMs && rr_ms < H::kHighMs)) return -1;
  const int b = static_cast<int>(std::floor((rr_ms - H::kLowMs) / H::kBinMs));
  return std::min(b, H::kSide - 1);
}

PoincareHistogram poincare_histogram(std::span<const double> rr) {
  return poincare_histogram(rr, std::accumulate(rr.begin(), rr.end(), 0.0));
}

PoincareHistogram poincare_histogram(std::span<const double> rr, double duration_ms) {
  PoincareHistogram h;
  h.duration_ms = duration_ms;
  if (rr.size() < 2) return h;
  int prev = poincare_bin(rr[0]);
  for (std::size_t i = 1; i < rr.size(); ++i) {
    const int cur = poincare_bin(rr[i]);
    ++h.total_pairs;
    if (prev >= 0 && cur >= 0) {
      ++h.counts[static_cast<std::size_t>(prev * PoincareHistogram::kSide + cur)];
    } else {
      ++h.discarded_pairs;
    }
    prev = cur;
  }
  return h;
}

double poincare_error(const PoincareHistogram& obs, const PoincareHistogram& sim) {
  double t_norm = 1.0;
  if (obs.duration_ms > 0.0 && sim.duration_ms > 0.0) t_norm = sim.duration_ms / obs.duration_ms;
  double sum = 0.0;
  for (std::size_t k = 0; k < obs.counts.size(); ++k) {
    const double x = obs.counts[k];
    const double diff = x - sim.counts[k] / t_norm;
    if (diff != 0.0) sum += diff * diff / std::sqrt(std::max(x, 1.0));
  }
  return sum / PoincareHistogram::kBins;
}

double delta_p(const PoincareHistogram& current, const PoincareHistogram& next) {
  return poincare_error(current, next);
}

void write_histogram_csv(std::ostream& os, const PoincareHistogram& h) {
  for (int r = 0; r < PoincareHistogram::kSide; ++r) {
    for (int c = 0; c < PoincareHistogram::kSide; ++c) {
      if (c) os << ',';
      os << h.at(r, c);
    }
    os << '\n';
  }
}

}  // namespace avnode
