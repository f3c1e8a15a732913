#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "avnode/trends.hpp"

using namespace avnode;

namespace {

constexpr double kHour = 3600.0;

// Brute-force Pearson correlation of plain ranks (no ties).
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

TrendPoint point(int index, double clock_h, double phi) {
  TrendPoint p;
  p.index = index;
  p.start_ms = index * 300e3;
  p.clock_s = clock_h * kHour;
  p.summary.phi_max = {phi, phi / 2, 10, 40};
  p.summary.phi_5 = {phi - 50, 0, 5, 30};
  p.summary.phi_95 = {phi + 50, phi, 15, 50};
  p.summary.sp_ratio = 0.5;
  return p;
}

// One point per hour starting at 08:00, with day points at 1000 and night at 800.
TrendSeries day_and_night() {
  TrendSeries s;
  s.patient_id = "t";
  for (int h = 0; h < 24; ++h) {
    const double clock = std::fmod(8.0 + h, 24.0);
    const double phi = is_nighttime(clock * kHour) ? 800.0 : 1000.0;
    auto p = point(12 * h, clock, phi);
    p.start_ms = h * kHour * 1000.0;
    s.points.push_back(p);
  }
  return s;
}

}  // namespace

TEST_CASE("day and night windows") {
  CHECK(is_daytime(9 * kHour));
  CHECK_FALSE(is_daytime(21 * kHour));
  CHECK(is_daytime(20.99 * kHour));
  CHECK(is_nighttime(2 * kHour));
  CHECK_FALSE(is_nighttime(6 * kHour));
  CHECK_FALSE(is_nighttime(23 * kHour));
}

TEST_CASE("KS distance") {
  CHECK(ks_distance(std::vector<double>{1, 2}, std::vector<double>{1, 3}) == 0.5);
  const std::vector<double> x = {4, 1, 3, 3, 9};
  CHECK(ks_distance(x, x) == 0.0);
  CHECK(ks_distance(std::vector<double>{1, 2, 3}, std::vector<double>{10, 11}) == 1.0);
  CHECK(ks_distance(std::vector<double>{1, 2, 3, 4}, std::vector<double>{3}) == doctest::Approx(0.5));
  CHECK(std::isnan(ks_distance(std::vector<double>{}, x)));
}

TEST_CASE("diurnal variability") {
  const auto s = day_and_night();
  const auto dv = diurnal_variability(s);
  REQUIRE(dv.has_value());
  CHECK((*dv)[0] == doctest::Approx(1000.0 / 800.0));
  CHECK((*dv)[2] == doctest::Approx(1.0));

  TrendSeries day_only;
  day_only.points.push_back(point(0, 10.0, 500.0));
  CHECK_FALSE(diurnal_variability(day_only).has_value());
}

TEST_CASE("short-term variability uses consecutive segments only") {
  TrendSeries s;
  for (int i : {0, 1, 2, 4}) {
    auto p = point(i, 8.0 + i / 12.0, 500.0);
    p.samples[0] = {static_cast<double>(i), i + 1.0};
    for (std::size_t k = 1; k < kNumProperties; ++k) p.samples[k] = {1.0, 2.0};
    s.points.push_back(p);
  }
  const auto ks = short_term_variability(s);
  REQUIRE(ks.has_value());
  // Pairs (0,1) and (1,2) each shift by one: distance 0.5. (2,4) is skipped.
  CHECK((*ks)[0] == doctest::Approx(0.5));
  CHECK((*ks)[1] == 0.0);

  TrendSeries single;
  single.points.push_back(point(0, 8.0, 500.0));
  CHECK_FALSE(short_term_variability(single).has_value());
}

TEST_CASE("KS window starts at the last 08:00") {
  TrendSeries s;
  // Recording starts at 10:00: the window runs from -2 h to +22 h.
  for (double h : {0.0, 21.9, 22.0, 30.0}) {
    TrendPoint p;
    p.start_ms = h * kHour * 1000.0;
    p.clock_s = std::fmod(10.0 + h, 24.0) * kHour;
    s.points.push_back(p);
  }
  CHECK(ks_window(s).size() == 2);
}

TEST_CASE("Spearman correlation") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {2, 1, 4, 3, 5};
  const auto r = spearman(x, y);
  REQUIRE(r.rho.has_value());
  CHECK(*r.rho == doctest::Approx(pearson(x, y)).epsilon(1e-14));
  CHECK(*r.rho == doctest::Approx(0.8));
  CHECK(*r.p_value == doctest::Approx(0.10408803866182788).epsilon(1e-9));
  CHECK(r.n == 5);

  CHECK(*spearman(x, std::vector<double>{10, 20, 30, 40, 50}).rho == 1.0);
  CHECK(*spearman(x, std::vector<double>{5, 4, 3, 2, 1}).rho == -1.0);

  // Ties share ranks.
  const auto tied = spearman(std::vector<double>{1, 2, 2, 3, 5, 4}, std::vector<double>{1, 1, 2, 3, 4, 6});
  CHECK(*tied.rho == doctest::Approx(0.8970588235294118).epsilon(1e-12));
  CHECK(*tied.p_value == doctest::Approx(0.015349900773458162).epsilon(1e-9));
  CHECK(average_ranks(std::vector<double>{3, 1, 3}) == std::vector<double>{2.5, 1, 2.5});

  CHECK_FALSE(spearman(x, std::vector<double>(5, 1.0)).rho.has_value());
  const double nan = std::nan("");
  const auto dropped = spearman(std::vector<double>{1, 2, nan, 4}, std::vector<double>{1, 2, 3, 4});
  CHECK(dropped.n == 3);
  CHECK_FALSE(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}).rho.has_value());
}

TEST_CASE("patient metrics and cohort table") {
  const auto m = patient_metrics(day_and_night());
  CHECK(m.n_segments == 24);
  CHECK(m.phi_max_day[0] == 1000.0);
  CHECK(m.phi_max_night[0] == 800.0);
  CHECK(m.phi_max_24h[0] == doctest::Approx((20 * 1000.0 + 4 * 800.0) / 24));
  CHECK(m.width_24h[0] == doctest::Approx(100.0));
  CHECK(m.sp_ratio_24h == 0.5);
  REQUIRE(m.delta_dv.has_value());

  const std::vector<PatientMetrics> one = {m};
  const auto rows = cohort_table(one);
  REQUIRE_FALSE(rows.empty());
  CHECK(rows[0].metric == "phi_max_24h");
  CHECK(rows[0].n == 1);
  CHECK(rows[0].sd[0] == 0.0);

  const std::vector<PatientMetrics> two = {m, m};
  for (const auto& row : cohort_table(two)) {
    for (std::size_t k = 0; k < kNumProperties; ++k) {
      if (std::isnan(row.mean[k])) continue;
      CHECK(row.sd[k] == doctest::Approx(0.0));
    }
  }
  std::ostringstream os;
  write_cohort_csv(os, cohort_table(two));
  CHECK(os.str().find("phi_max_night") != std::string::npos);
}
