#include "avnode/trends.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace avnode {

namespace {

constexpr double kHour = 3600.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Accumulator {
  PropertyArray sum{};
  std::size_t n = 0;

  void add(const PropertyArray& v) {
    for (std::size_t p = 0; p < kNumProperties; ++p) sum[p] += v[p];
    ++n;
  }
  PropertyArray mean() const {
    PropertyArray out{};
    for (std::size_t p = 0; p < kNumProperties; ++p) out[p] = n ? sum[p] / static_cast<double>(n) : kNaN;
    return out;
  }
};

PropertyArray width_of(const PropertySummary& s) {
  PropertyArray w{};
  for (std::size_t p = 0; p < kNumProperties; ++p) w[p] = s.phi_95[p] - s.phi_5[p];
  return w;
}

void write_value(std::ostream& os, double v) {
  if (std::isfinite(v)) {
    os << v;
  } else {
    os << "NA";
  }
}

}  // namespace

bool is_daytime(double clock_s) { return clock_s >= 9.0 * kHour && clock_s < 21.0 * kHour; }
bool is_nighttime(double clock_s) { return clock_s >= 2.0 * kHour && clock_s < 6.0 * kHour; }

std::optional<PropertyArray> diurnal_variability(const TrendSeries& series) {
  Accumulator day, night;
  for (const auto& pt : series.points) {
    if (is_daytime(pt.clock_s)) day.add(pt.summary.phi_max);
    if (is_nighttime(pt.clock_s)) night.add(pt.summary.phi_max);
  }
  if (day.n == 0 || night.n == 0) return std::nullopt;
  const auto d = day.mean();
  const auto n = night.mean();
  PropertyArray out{};
  for (std::size_t p = 0; p < kNumProperties; ++p) out[p] = d[p] / n[p];
  return out;
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return kNaN;
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

std::vector<const TrendPoint*> ks_window(const TrendSeries& series) {
  std::vector<const TrendPoint*> out;
  if (series.points.empty()) return out;
  // Recording start time of day, recovered from any point.
  const auto& first = series.points.front();
  auto wrap = [](double s) { return s - 24.0 * kHour * std::floor(s / (24.0 * kHour)); };
  const double rec_clock = wrap(first.clock_s - first.start_ms / 1000.0);
  const double offset_s = wrap(rec_clock - 8.0 * kHour);
  const double window_lo_ms = -offset_s * 1000.0;
  const double window_hi_ms = window_lo_ms + 24.0 * kHour * 1000.0;
  for (const auto& pt : series.points) {
    if (pt.start_ms >= window_lo_ms && pt.start_ms < window_hi_ms) out.push_back(&pt);
  }
  return out;
}

std::optional<PropertyArray> short_term_variability(const TrendSeries& series) {
  const auto pts = ks_window(series);
  Accumulator acc;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i]->index != pts[i - 1]->index + 1) continue;
    PropertyArray d{};
    for (std::size_t p = 0; p < kNumProperties; ++p) d[p] = ks_distance(pts[i - 1]->samples[p], pts[i]->samples[p]);
    acc.add(d);
  }
  if (acc.n == 0) return std::nullopt;
  return acc.mean();
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  SpearmanResult out;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    xs.push_back(x[i]);
    ys.push_back(y[i]);
  }
  out.n = xs.size();
  if (out.n < 3) return out;
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(out.n);
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < out.n; ++i) {
    const double a = rx[i] - mean;
    const double b = ry[i] - mean;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) return out;
  const double rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  out.rho = rho;
  if (std::abs(rho) >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double df = n - 2.0;
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    boost::math::students_t dist(df);
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return out;
}

PatientMetrics patient_metrics(const TrendSeries& series) {
  PatientMetrics m;
  m.patient_id = series.patient_id;
  m.n_segments = series.points.size();
  Accumulator phi_all, phi_day, phi_night, w_all, w_day, w_night;
  double sp_all = 0.0, sp_day = 0.0, sp_night = 0.0;
  std::size_t n_all = 0, n_day = 0, n_night = 0;
  for (const auto& pt : series.points) {
    const auto w = width_of(pt.summary);
    phi_all.add(pt.summary.phi_max);
    w_all.add(w);
    const bool day = is_daytime(pt.clock_s);
    const bool night = is_nighttime(pt.clock_s);
    if (day) {
      phi_day.add(pt.summary.phi_max);
      w_day.add(w);
    }
    if (night) {
      phi_night.add(pt.summary.phi_max);
      w_night.add(w);
    }
    if (pt.summary.sp_ratio) {
      const double r = *pt.summary.sp_ratio;
      sp_all += r;
      ++n_all;
      if (day) sp_day += r, ++n_day;
      if (night) sp_night += r, ++n_night;
    }
  }
  m.phi_max_24h = phi_all.mean();
  m.phi_max_day = phi_day.mean();
  m.phi_max_night = phi_night.mean();
  m.width_24h = w_all.mean();
  m.width_day = w_day.mean();
  m.width_night = w_night.mean();
  m.delta_dv = diurnal_variability(series);
  m.mean_delta_ks = short_term_variability(series);
  m.sp_ratio_24h = n_all ? sp_all / static_cast<double>(n_all) : kNaN;
  m.sp_ratio_day = n_day ? sp_day / static_cast<double>(n_day) : kNaN;
  m.sp_ratio_night = n_night ? sp_night / static_cast<double>(n_night) : kNaN;
  return m;
}

std::vector<CohortRow> cohort_table(std::span<const PatientMetrics> patients) {
  struct Spec {
    const char* name;
    double cd_scale;
    std::optional<PropertyArray> (*get)(const PatientMetrics&);
  };
  static const Spec kRows[] = {
      {"phi_max_24h", kTotalDelayFactor, [](const PatientMetrics& m) { return std::optional(m.phi_max_24h); }},
      {"phi_max_day", kTotalDelayFactor, [](const PatientMetrics& m) { return std::optional(m.phi_max_day); }},
      {"phi_max_night", kTotalDelayFactor, [](const PatientMetrics& m) { return std::optional(m.phi_max_night); }},
      {"width_24h", kTotalDelayFactor, [](const PatientMetrics& m) { return std::optional(m.width_24h); }},
      {"width_day", kTotalDelayFactor, [](const PatientMetrics& m) { return std::optional(m.width_day); }},
      {"width_night", kTotalDelayFactor, [](const PatientMetrics& m) { return std::optional(m.width_night); }},
      {"mean_delta_ks", 1.0, [](const PatientMetrics& m) { return m.mean_delta_ks; }},
      {"delta_dv", 1.0, [](const PatientMetrics& m) { return m.delta_dv; }},
  };
  std::vector<CohortRow> rows;
  for (const auto& spec : kRows) {
    CohortRow row;
    row.metric = spec.name;
    row.cd_scale = spec.cd_scale;
    std::array<std::vector<double>, kNumProperties> values;
    for (const auto& pm : patients) {
      const auto v = spec.get(pm);
      if (!v) continue;
      for (std::size_t p = 0; p < kNumProperties; ++p) {
        const double scale = (p >= 2) ? spec.cd_scale : 1.0;
        if (std::isfinite((*v)[p])) values[p].push_back((*v)[p] * scale);
      }
    }
    for (std::size_t p = 0; p < kNumProperties; ++p) {
      const auto& vals = values[p];
      row.n = std::max(row.n, vals.size());
      if (vals.empty()) {
        row.mean[p] = row.sd[p] = kNaN;
        continue;
      }
      const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
      double ss = 0.0;
      for (double x : vals) ss += (x - mean) * (x - mean);
      row.mean[p] = mean;
      row.sd[p] = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_patient_metrics_csv(std::ostream& os, std::span<const PatientMetrics> patients) {
  os << "patient,n_segments";
  const char* groups[] = {"phi_max_24h", "phi_max_day", "phi_max_night", "width_24h", "width_day",
                          "width_night", "delta_dv",    "mean_delta_ks"};
  for (const char* g : groups) {
    for (std::size_t p = 0; p < kNumProperties; ++p) os << ',' << g << '_' << property_name(p);
  }
  os << ",sp_ratio_24h,sp_ratio_day,sp_ratio_night\n";
  for (const auto& m : patients) {
    os << m.patient_id << ',' << m.n_segments;
    auto put = [&](const std::optional<PropertyArray>& v) {
      for (std::size_t p = 0; p < kNumProperties; ++p) {
        os << ',';
        write_value(os, v ? (*v)[p] : kNaN);
      }
    };
    put(m.phi_max_24h);
    put(m.phi_max_day);
    put(m.phi_max_night);
    put(m.width_24h);
    put(m.width_day);
    put(m.width_night);
    put(m.delta_dv);
    put(m.mean_delta_ks);
    for (double v : {m.sp_ratio_24h, m.sp_ratio_day, m.sp_ratio_night}) {
      os << ',';
      write_value(os, v);
    }
    os << '\n';
  }
}

void write_cohort_csv(std::ostream& os, std::span<const CohortRow> rows) {
  os << "metric,r_fp_mean,r_fp_std,r_sp_mean,r_sp_std,d_fp_mean,d_fp_std,d_sp_mean,d_sp_std,cd_scale,n\n";
  for (const auto& row : rows) {
    os << row.metric;
    for (std::size_t p = 0; p < kNumProperties; ++p) {
      os << ',';
      write_value(os, row.mean[p]);
      os << ',';
      write_value(os, row.sd[p]);
    }
    os << ',' << row.cd_scale << ',' << row.n << '\n';
  }
}

}  // namespace avnode
