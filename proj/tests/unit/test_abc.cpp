#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "avnode/abc.hpp"
#include "avnode/error.hpp"
#include "avnode/ingest.hpp"

using namespace avnode;

namespace {

Eigen::VectorXd scalar(double x) { return Eigen::VectorXd::Constant(1, x); }

ModelParameters generator() {
  ModelParameters p;
  p.fp = {450, 400, 150, 8, 20, 150};
  p.sp = {250, 300, 150, 15, 50, 150};
  return p;
}

std::vector<Individual> ranked_around(const ParamVector& centre, int n, double spread) {
  std::vector<Individual> out;
  for (int i = 0; i < n; ++i) {
    ParamVector v = centre;
    for (std::size_t k = 0; k < kNumParams; ++k) v[k] += spread * std::sin(1.7 * i + 0.9 * static_cast<double>(k));
    out.push_back({v, 1.0 + 0.01 * i});
  }
  return out;
}

}  // namespace

TEST_CASE("one-dimensional weight matches scalar Gaussian densities") {
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(1, 1);
  const std::vector<Eigen::VectorXd> prev = {scalar(0.0), scalar(1.0)};
  CHECK(update_weight(scalar(0.0), prev, {0.5, 0.5}, cov) == doctest::Approx(3.1205483187969425).epsilon(1e-13));
  CHECK(log_importance_weight(scalar(0.0), prev, {0.5, 0.5}, cov) ==
        doctest::Approx(1.1380087295845114).epsilon(1e-13));
  CHECK(update_weight(scalar(0.5), prev, {0.25, 0.75}, cov) == doctest::Approx(2.8403819518116857).epsilon(1e-13));
}

TEST_CASE("point-mass predecessor gives the inverse density") {
  const Eigen::MatrixXd cov = 4.0 * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd mode = Eigen::Vector2d(1.0, 2.0);
  const Eigen::VectorXd x = Eigen::Vector2d(2.0, 0.0);
  const double density = std::exp(log_normal_density(mode, x, cov));
  CHECK(update_weight(x, {mode}, {1.0}, cov) == doctest::Approx(1.0 / density).epsilon(1e-13));
  // Far from the previous population weighs more than at its mode.
  CHECK(update_weight(Eigen::Vector2d(9.0, 9.0), {mode}, {1.0}, cov) > update_weight(mode, {mode}, {1.0}, cov));
}

TEST_CASE("log weights normalize without overflow") {
  const auto w = normalize_log_weights({1000.0, 1000.0 + std::log(3.0)});
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[1] == doctest::Approx(0.75));
}

TEST_CASE("sample covariance") {
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 3, 2, 5, 8;
  const auto c = sample_covariance(x);
  CHECK(c(0, 0) == doctest::Approx(4.0));
  CHECK(c(1, 1) == doctest::Approx(12.0));
  CHECK(c(0, 1) == doctest::Approx(6.0));
}

TEST_CASE("regularization only touches singular matrices") {
  const auto bounds = ParameterBounds::abc();
  const Eigen::MatrixXd spd = Eigen::MatrixXd::Identity(12, 12);
  CHECK(regularize_covariance(spd, bounds) == spd);
  const auto fixed = regularize_covariance(Eigen::MatrixXd::Zero(12, 12), bounds);
  CHECK(fixed.llt().info() == Eigen::Success);
  CHECK(fixed(0, 0) == doctest::Approx(1e-6 * std::pow(1270.0 / 12.0, 2)));
}

TEST_CASE("initial particles") {
  AbcSchedule schedule;
  const auto centre = generator().to_array();

  SUBCASE("identical GA vectors collapse onto that vector") {
    std::vector<Individual> same(25, Individual{centre, 1.0});
    const auto pop = init_particles(same, schedule, 3);
    REQUIRE(pop.particles.size() == 100);
    for (const auto& p : pop.particles) {
      CHECK(p.weight == doctest::Approx(0.01));
      for (std::size_t k = 0; k < kNumParams; ++k) CHECK(std::abs(p.theta[k] - centre[k]) < 0.05 * schedule.bounds.range(k));
    }
  }

  SUBCASE("draws stay inside the bounds and sum to one") {
    auto ranked = ranked_around(centre, 25, 60.0);
    const auto pop = init_particles(ranked, schedule, 4);
    double total = 0.0;
    for (const auto& p : pop.particles) {
      CHECK(schedule.bounds.contains(p.theta));
      CHECK(std::isnan(p.eps));
      total += p.weight;
    }
    CHECK(total == doctest::Approx(1.0));
  }

  SUBCASE("too few GA vectors") {
    std::vector<Individual> few(3, Individual{centre, 1.0});
    CHECK_THROWS_AS(init_particles(few, schedule, 1), UsageError);
  }
}

TEST_CASE("thresholds follow the GA ranks") {
  AbcSchedule schedule;
  std::vector<Individual> ranked(25);
  for (int i = 0; i < 25; ++i) ranked[static_cast<std::size_t>(i)].eps = 0.1 * (i + 1);
  const auto t = schedule.thresholds(ranked);
  const std::vector<double> expected = {1.0, 0.8, 0.5, 0.3, 0.1, 0.1, 0.1, 0.1};
  REQUIRE(t.size() == expected.size());
  for (std::size_t j = 0; j < t.size(); ++j) CHECK(t[j] == doctest::Approx(expected[j]));
  CHECK_THROWS_AS(schedule.thresholds(std::vector<Individual>(5)), UsageError);
}

TEST_CASE("schedule validation") {
  AbcSchedule s;
  s.n_particles = 99;
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = AbcSchedule{};
  s.threshold_ranks = {1, 1};
  CHECK_THROWS_AS(s.validate(), UsageError);
}

TEST_CASE("sampler contract on a synthetic segment") {
  RRSegment seg;
  seg.lambda_hat = 7.0;
  const CouplingConfig coupling{300.0, 60.0};
  seg.rr_intervals = simulate(generator(), coupling, 7.0, 77).rr_intervals;

  AbcSchedule schedule;
  schedule.n_particles = 10;
  schedule.n_iterations = 3;
  schedule.threshold_ranks = {3, 2, 1};
  const auto ranked = ranked_around(generator().to_array(), 10, 20.0);
  const std::vector<double> thresholds = {2.0, 1.6, 1.3};
  const SeedScope seeds{1, 2, 3};
  const auto res = run_abc_with_thresholds(seg, ranked, coupling, schedule, thresholds, seeds);

  REQUIRE(res.population.particles.size() == 10);
  double total = 0.0;
  for (const auto& p : res.population.particles) {
    CHECK(p.eps <= 1.3);
    CHECK(schedule.bounds.contains(p.theta));
    total += p.weight;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.proposals.size() == 3);
  CHECK(res.simulations.size() == 3);
  CHECK(res.proposals[2] >= res.simulations[2]);

  const auto again = run_abc_with_thresholds(seg, ranked, coupling, schedule, thresholds, seeds);
  for (std::size_t v = 0; v < 10; ++v) {
    CHECK(again.population.particles[v].theta == res.population.particles[v].theta);
    CHECK(again.population.particles[v].weight == res.population.particles[v].weight);
  }

  SUBCASE("worker count does not change the result") {
    auto threaded = schedule;
    threaded.threads = 3;
    const auto t = run_abc_with_thresholds(seg, ranked, coupling, threaded, thresholds, seeds);
    for (std::size_t v = 0; v < 10; ++v) CHECK(t.population.particles[v].theta == res.population.particles[v].theta);
  }

  SUBCASE("unreachable threshold stalls") {
    auto guarded = schedule;
    guarded.max_simulations_per_slot = 20;
    CHECK_THROWS_AS(run_abc_with_thresholds(seg, ranked, coupling, guarded, {2.0, 1e-9, 1e-9}, seeds), AbcStall);
  }
}

TEST_CASE("out-of-bounds proposals are never accepted") {
  auto v = generator().to_array();
  v[0] = 1400;
  CHECK_FALSE(ParameterBounds::abc().contains(v));
}
