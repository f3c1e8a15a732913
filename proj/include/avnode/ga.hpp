#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "avnode/av_model.hpp"
#include "avnode/params.hpp"
#include "avnode/poincare.hpp"
#include "avnode/seeds.hpp"

namespace avnode {

struct RRSegment;

struct Individual {
  ParamVector theta{};
  /// Fitting error on the current segment; +inf when unusable.
  double eps = 0.0;
};

struct GaConfig {
  int population_size = 300;
  int tournament_size = 4;
  double crossover_rate = 0.9;
  double mutation_rate = 0.3;
  /// Creep half-width as a fraction of each coordinate's range.
  double mutation_width = 0.05;
  int immigration_count = 10;
  int elite_count = 1;
  int generations_min = 2;
  int generations_max = 7;
  /// Generation budget for the first segment, which has no predecessor.
  int generations_first = 7;
  int ranked_count = 25;
  double simulation_ms = 600'000.0;
  int threads = 1;
  ParameterBounds bounds = ParameterBounds::ga();
};

/// Latin hypercube sample of `n` points: every coordinate hits each of its n
/// equal-width strata exactly once.
std::vector<ParamVector> latin_hypercube(int n, const ParameterBounds& bounds, std::uint64_t seed);

std::vector<Individual> init_population(const GaConfig& config, std::uint64_t seed);

/// Error of one parameter vector against an observed histogram, from one
/// simulation of `simulation_ms`. Fewer than two simulated RR intervals
/// yields +inf.
double evaluate_theta(const ParamVector& theta, const PoincareHistogram& observed, const CouplingConfig& coupling,
                      double lambda_hz, double simulation_ms, std::uint64_t seed);

/// Recomputes eps for every individual on `segment`. Individual i uses seed
/// seeds(Purpose::kGaEval, replicate_base + i).
void evaluate(std::vector<Individual>& pop, const RRSegment& segment, const CouplingConfig& coupling,
              const GaConfig& config, const SeedScope& seeds, std::uint64_t replicate_base = 0);

/// Maps a consecutive-segment histogram difference to a generation budget:
/// piecewise linear from generations_min at `low_anchor` to generations_max
/// at `high_anchor`, clamped.
struct GenerationSchedule {
  double low_anchor = 0.0;
  double high_anchor = 0.0;
  int generations_min = 2;
  int generations_max = 7;

  /// Anchors at the lower and upper quartile of a patient's delta-P values.
  static GenerationSchedule from_delta_p(std::vector<double> delta_ps, const GaConfig& config);

  int generations(double delta_p) const;
};

struct GaSegmentResult {
  /// Fittest individuals, eps ascending.
  std::vector<Individual> ranked;
  int generations = 0;
  double best_eps_before = 0.0;
};

/// Runs `generations` rounds of elitism, tournament selection, two-point
/// crossover and creep mutation on an evaluated population, then replaces
/// the least-fit individuals with fresh latin-hypercube immigrants.
/// `pop` is updated in place and stays fully evaluated on `segment`.
GaSegmentResult evolve_segment(std::vector<Individual>& pop, const RRSegment& segment, int generations,
                               const CouplingConfig& coupling, const GaConfig& config, const SeedScope& seeds);

/// Best `count` individuals, eps ascending; ties keep population order.
std::vector<Individual> rank_population(const std::vector<Individual>& pop, int count);

/// Sequential per-patient driver: the population is carried from one segment
/// to the next and re-evaluated on each.
class GaRunner {
 public:
  GaRunner(GaConfig config, CouplingConfig coupling, GenerationSchedule schedule, std::uint64_t root_seed,
           std::uint64_t patient_key);

  /// Processes the next segment. `delta_p_prev` is the histogram difference
  /// to the previous processed segment (ignored for the first one).
  GaSegmentResult step(const RRSegment& segment, double delta_p_prev);

  const std::vector<Individual>& population() const { return population_; }
  void set_population(std::vector<Individual> pop) { population_ = std::move(pop); }
  bool started() const { return !population_.empty(); }

 private:
  GaConfig config_;
  CouplingConfig coupling_;
  GenerationSchedule schedule_;
  std::uint64_t root_seed_;
  std::uint64_t patient_key_;
  std::vector<Individual> population_;
};

}  // namespace avnode
