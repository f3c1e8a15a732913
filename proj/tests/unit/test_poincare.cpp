#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "avnode/poincare.hpp"

using namespace avnode;

TEST_CASE("bin edges") {
  CHECK(poincare_bin(249.999) == -1);
  CHECK(poincare_bin(250.0) == 0);
  CHECK(poincare_bin(299.999) == 0);
  CHECK(poincare_bin(300.0) == 1);
  CHECK(poincare_bin(500.0) == 5);
  CHECK(poincare_bin(1799.999) == 30);
  CHECK(poincare_bin(1800.0) == -1);
  CHECK(poincare_bin(std::nan("")) == -1);
}

TEST_CASE("degenerate series give an empty histogram") {
  for (const auto& rr : {std::vector<double>{}, std::vector<double>{600.0}}) {
    const auto h = poincare_histogram(rr);
    CHECK(std::accumulate(h.counts.begin(), h.counts.end(), 0u) == 0u);
    CHECK(h.total_pairs == 0);
  }
}

TEST_CASE("three equal intervals fill bin (5,5) twice") {
  const auto h = poincare_histogram(std::vector<double>{500, 500, 500});
  CHECK(h.at(5, 5) == 2);
  CHECK(std::accumulate(h.counts.begin(), h.counts.end(), 0u) == 2u);
  CHECK(h.duration_ms == 1500.0);
}

TEST_CASE("pairs with an out-of-range member are discarded") {
  const auto h = poincare_histogram(std::vector<double>{200, 500});
  CHECK(std::accumulate(h.counts.begin(), h.counts.end(), 0u) == 0u);
  CHECK(h.discarded_pairs == 1);
  const auto g = poincare_histogram(std::vector<double>{500, 2000, 600, 700});
  CHECK(g.at(poincare_bin(600), poincare_bin(700)) == 1);
  CHECK(g.discarded_pairs == 2);
}

TEST_CASE("rows index RR_n and columns RR_n+1") {
  const auto h = poincare_histogram(std::vector<double>{400, 900});
  CHECK(h.at(3, 13) == 1);
  CHECK(h.at(13, 3) == 0);
}

TEST_CASE("error identities") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(300, 1200);
  std::vector<double> rr(700);
  for (auto& v : rr) v = u(rng);
  const auto h = poincare_histogram(rr);
  CHECK(poincare_error(h, h) == 0.0);

  // One observed pair, empty simulation, unit duration ratio.
  PoincareHistogram one;
  one.counts[123] = 1;
  CHECK(poincare_error(one, PoincareHistogram{}) == doctest::Approx(1.0 / 961.0).epsilon(1e-15));

  // Duplicated simulation over twice the duration.
  PoincareHistogram twice = h;
  for (auto& c : twice.counts) c *= 2;
  twice.duration_ms = 2.0 * h.duration_ms;
  CHECK(poincare_error(h, twice) == 0.0);

  std::vector<double> other(500);
  for (auto& v : other) v = u(rng);
  CHECK(poincare_error(h, poincare_histogram(other)) > 0.0);
}

TEST_CASE("error matches direct summation") {
  PoincareHistogram obs, sim;
  obs.counts[0] = 4;
  obs.counts[10] = 1;
  sim.counts[10] = 3;
  sim.counts[20] = 2;
  obs.duration_ms = 1000.0;
  sim.duration_ms = 2000.0;
  // t_norm = 2: (4-0)^2/2 + (1-1.5)^2/1 + (0-1)^2/1
  const double expected = (16.0 / 2.0 + 0.25 + 1.0) / 961.0;
  CHECK(poincare_error(obs, sim) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("delta P between consecutive segments") {
  const std::vector<double> a = {500, 520, 540, 560, 580, 600};
  CHECK(delta_p(poincare_histogram(a), poincare_histogram(a)) == 0.0);

  // Disjoint supports with n pairs each: brute force over the nonzero bins.
  const std::vector<double> lo = {400, 400, 400, 400};
  const std::vector<double> hi = {1000, 1000, 1000, 1000};
  const double dp = delta_p(poincare_histogram(lo), poincare_histogram(hi));
  // x = 3 in one bin, xs = 3 in another; t_norm = 4000 / 1600 = 2.5.
  CHECK(dp == doctest::Approx((9.0 / std::sqrt(3.0) + 1.2 * 1.2) / 961.0).epsilon(1e-15));

  // Next segment empty: sum of x^2 / sqrt(x).
  PoincareHistogram cur;
  cur.counts[7] = 9;
  cur.counts[8] = 4;
  CHECK(delta_p(cur, PoincareHistogram{}) == doctest::Approx((27.0 + 8.0) / 961.0).epsilon(1e-15));
}

TEST_CASE("histogram CSV is 31 x 31") {
  std::ostringstream os;
  write_histogram_csv(os, poincare_histogram(std::vector<double>{500, 500, 500}));
  std::istringstream in(os.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 30);
  }
  CHECK(rows == 31);
}
