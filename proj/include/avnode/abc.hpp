#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "avnode/av_model.hpp"
#include "avnode/ga.hpp"
#include "avnode/params.hpp"
#include "avnode/seeds.hpp"

namespace avnode {

struct RRSegment;

struct Particle {
  ParamVector theta{};
  double weight = 0.0;
  /// Error at acceptance; NaN for initial particles, which are not thresholded.
  double eps = 0.0;
};

struct AbcSchedule {
  int n_particles = 100;
  int n_iterations = 8;
  int n_centers = 5;
  /// GA ranks (1-based) whose errors become the thresholds T_1..T_n.
  std::vector<int> threshold_ranks = {10, 8, 5, 3, 1, 1, 1, 1};
  /// Stall guard: model runs allowed per particle slot and iteration.
  long max_simulations_per_slot = 20'000;
  /// Out-of-bounds draws are not simulated; they get a separate, larger cap.
  long max_draws_per_slot = 10'000'000;
  double simulation_ms = 600'000.0;
  int threads = 1;
  ParameterBounds bounds = ParameterBounds::abc();
  /// Restrict particles to the canonical pathway labelling (see
  /// pathways_ordered); GA vectors are relabelled before seeding.
  bool ordered_pathways = true;

  /// Inside the bounds and, if required, canonically labelled.
  bool admissible(const ParamVector& v) const {
    return bounds.contains(v) && (!ordered_pathways || pathways_ordered(v));
  }

  /// Throws UsageError on inconsistent sizes.
  void validate() const;
  /// Thresholds from GA errors (eps ascending). T_j = eps of rank r_j.
  std::vector<double> thresholds(const std::vector<Individual>& ga_ranked) const;
};

struct AbcPopulation {
  std::vector<Particle> particles;
  /// Perturbation kernel covariance derived from this population.
  Eigen::MatrixXd kernel;
};

struct AbcResult {
  AbcPopulation population;
  std::vector<double> thresholds;
  /// Proposals drawn per iteration (index 0 is the initial population).
  std::vector<long> proposals;
  /// Model runs per iteration; proposals outside the bounds are never simulated.
  std::vector<long> simulations;
};

/// Unweighted sample covariance of the rows of `x` (n - 1 denominator).
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x);

/// Returns `cov` if positive definite, otherwise adds
/// 1e-6 * diag((range_i / 12)^2), escalating by 10x until it is.
Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& cov, const ParameterBounds& bounds);

/// log N(x | mean, cov) for a positive definite covariance.
double log_normal_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

/// Log of the unnormalized importance weight
///   w = ( sum_k w_k * N(theta_k | candidate, cov) )^-1
/// over a previous weighted population, computed in log space.
/// Throws std::runtime_error when the sum is not finite and positive.
double log_importance_weight(const Eigen::VectorXd& candidate, const std::vector<Eigen::VectorXd>& previous,
                             const std::vector<double>& previous_weights, const Eigen::MatrixXd& cov);

/// Unnormalized importance weight (exp of log_importance_weight).
double update_weight(const Eigen::VectorXd& candidate, const std::vector<Eigen::VectorXd>& previous,
                     const std::vector<double>& previous_weights, const Eigen::MatrixXd& cov);

/// Normalizes log weights to sum 1.
std::vector<double> normalize_log_weights(const std::vector<double>& log_w);

/// Initial population: n_particles / n_centers draws from N(theta_GA_u, S)
/// around each of the n_centers fittest GA vectors, S the covariance of all
/// ranked GA vectors. Inadmissible draws are redrawn. Equal weights.
AbcPopulation init_particles(const std::vector<Individual>& ga_ranked, const AbcSchedule& schedule,
                             std::uint64_t seed);

/// ABC population Monte Carlo on one segment. Throws AbcStall if a slot
/// exhausts its stall guard.
AbcResult run_abc(const RRSegment& segment, const std::vector<Individual>& ga_ranked, const CouplingConfig& coupling,
                  const AbcSchedule& schedule, const SeedScope& seeds);

/// Variant with explicit thresholds T_1..T_n (T_1 is unused by the sampler).
AbcResult run_abc_with_thresholds(const RRSegment& segment, const std::vector<Individual>& ga_ranked,
                                  const CouplingConfig& coupling, const AbcSchedule& schedule,
                                  const std::vector<double>& thresholds, const SeedScope& seeds);

}  // namespace avnode
