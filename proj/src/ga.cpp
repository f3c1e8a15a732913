#include "avnode/ga.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "avnode/error.hpp"
#include "avnode/ingest.hpp"
#include "avnode/parallel.hpp"

namespace avnode {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Replicate offsets keep evaluation seeds of different phases disjoint.
constexpr std::uint64_t kGenerationStride = 1'000'000;
constexpr std::uint64_t kImmigrantBase = 999'000'000;

std::size_t tournament(const std::vector<Individual>& pop, int size, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
  std::size_t best = pick(rng);
  for (int k = 1; k < size; ++k) {
    const std::size_t c = pick(rng);
    if (pop[c].eps < pop[best].eps || (pop[c].eps == pop[best].eps && c < best)) best = c;
  }
  return best;
}

void two_point_crossover(ParamVector& a, ParamVector& b, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> cut(1, kNumParams - 1);
  std::size_t i = cut(rng);
  std::size_t j = cut(rng);
  while (j == i) j = cut(rng);
  if (i > j) std::swap(i, j);
  for (std::size_t k = i; k < j; ++k) std::swap(a[k], b[k]);
}

void creep_mutation(ParamVector& v, const GaConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> step(-1.0, 1.0);
  for (std::size_t k = 0; k < kNumParams; ++k) {
    if (u01(rng) < config.mutation_rate) v[k] += step(rng) * config.mutation_width * config.bounds.range(k);
  }
  config.bounds.clamp(v);
}

double quartile(std::vector<double>& v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::vector<ParamVector> latin_hypercube(int n, const ParameterBounds& bounds, std::uint64_t seed) {
  if (n <= 0) return {};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<ParamVector> out(static_cast<std::size_t>(n));
  std::vector<int> strata(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < kNumParams; ++k) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    const double width = bounds.range(k) / n;
    for (std::size_t i = 0; i < out.size(); ++i) {
      double x = bounds.lo[k] + (strata[i] + u01(rng)) * width;
      // Rounding must not push a sample into the next stratum.
      x = std::min(x, std::nextafter(bounds.lo[k] + (strata[i] + 1) * width, bounds.lo[k]));
      out[i][k] = std::min(x, bounds.hi[k]);
    }
  }
  return out;
}

std::vector<Individual> init_population(const GaConfig& config, std::uint64_t seed) {
  std::vector<Individual> pop;
  for (const auto& theta : latin_hypercube(config.population_size, config.bounds, seed)) {
    pop.push_back({theta, kInf});
  }
  return pop;
}

double evaluate_theta(const ParamVector& theta, const PoincareHistogram& observed, const CouplingConfig& coupling,
                      double lambda_hz, double simulation_ms, std::uint64_t seed) {
  SimulationOptions opts;
  opts.duration_ms = simulation_ms;
  const auto sim = simulate(ModelParameters::from_array(theta), coupling, lambda_hz, seed, opts);
  if (sim.rr_intervals.size() < 2) return kInf;
  return poincare_error(observed, poincare_histogram(sim.rr_intervals));
}

void evaluate(std::vector<Individual>& pop, const RRSegment& segment, const CouplingConfig& coupling,
              const GaConfig& config, const SeedScope& seeds, std::uint64_t replicate_base) {
  if (!(segment.lambda_hat > 0.0)) throw UsageError("segment has no atrial rate attached");
  const auto observed = poincare_histogram(segment.rr_intervals);
  parallel_for(pop.size(), config.threads, [&](std::size_t i) {
    pop[i].eps = evaluate_theta(pop[i].theta, observed, coupling, segment.lambda_hat, config.simulation_ms,
                                seeds(Purpose::kGaEval, replicate_base + i));
  });
}

GenerationSchedule GenerationSchedule::from_delta_p(std::vector<double> delta_ps, const GaConfig& config) {
  GenerationSchedule s;
  s.generations_min = config.generations_min;
  s.generations_max = config.generations_max;
  std::erase_if(delta_ps, [](double d) { return !std::isfinite(d); });
  if (delta_ps.empty()) return s;
  s.low_anchor = quartile(delta_ps, 0.25);
  s.high_anchor = quartile(delta_ps, 0.75);
  return s;
}

int GenerationSchedule::generations(double delta_p) const {
  if (!(delta_p > low_anchor)) return generations_min;
  if (delta_p >= high_anchor) return generations_max;
  const double frac = (delta_p - low_anchor) / (high_anchor - low_anchor);
  const int g = generations_min + static_cast<int>(std::lround(frac * (generations_max - generations_min)));
  return std::clamp(g, generations_min, generations_max);
}

std::vector<Individual> rank_population(const std::vector<Individual>& pop, int count) {
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pop[a].eps < pop[b].eps; });
  const auto n = std::min(order.size(), static_cast<std::size_t>(std::max(count, 0)));
  std::vector<Individual> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pop[order[i]]);
  return out;
}

GaSegmentResult evolve_segment(std::vector<Individual>& pop, const RRSegment& segment, int generations,
                               const CouplingConfig& coupling, const GaConfig& config, const SeedScope& seeds) {
  if (pop.empty()) throw UsageError("cannot evolve an empty population");
  GaSegmentResult result;
  result.generations = generations;
  result.best_eps_before = rank_population(pop, 1).front().eps;

  const auto n = pop.size();
  const auto elites = std::min<std::size_t>(static_cast<std::size_t>(std::max(config.elite_count, 0)), n);
  for (int g = 0; g < generations; ++g) {
    std::mt19937_64 rng(seeds(Purpose::kGaOperators, static_cast<std::uint64_t>(g)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    std::vector<Individual> next = rank_population(pop, static_cast<int>(elites));
    while (next.size() < n) {
      ParamVector a = pop[tournament(pop, config.tournament_size, rng)].theta;
      ParamVector b = pop[tournament(pop, config.tournament_size, rng)].theta;
      if (u01(rng) < config.crossover_rate) two_point_crossover(a, b, rng);
      creep_mutation(a, config, rng);
      creep_mutation(b, config, rng);
      next.push_back({a, kInf});
      if (next.size() < n) next.push_back({b, kInf});
    }

    std::vector<Individual> offspring(next.begin() + static_cast<std::ptrdiff_t>(elites), next.end());
    evaluate(offspring, segment, coupling, config, seeds, (static_cast<std::uint64_t>(g) + 1) * kGenerationStride);
    std::copy(offspring.begin(), offspring.end(), next.begin() + static_cast<std::ptrdiff_t>(elites));
    pop = std::move(next);
  }

  const auto immigrants = std::min<std::size_t>(static_cast<std::size_t>(std::max(config.immigration_count, 0)),
                                                n - elites);
  if (immigrants > 0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pop[a].eps < pop[b].eps; });
    std::vector<Individual> fresh;
    for (const auto& theta :
         latin_hypercube(static_cast<int>(immigrants), config.bounds, seeds(Purpose::kGaImmigration, 0))) {
      fresh.push_back({theta, kInf});
    }
    evaluate(fresh, segment, coupling, config, seeds, kImmigrantBase);
    for (std::size_t k = 0; k < immigrants; ++k) pop[order[n - 1 - k]] = fresh[k];
  }

  result.ranked = rank_population(pop, config.ranked_count);
  return result;
}

GaRunner::GaRunner(GaConfig config, CouplingConfig coupling, GenerationSchedule schedule, std::uint64_t root_seed,
                   std::uint64_t patient_key)
    : config_(std::move(config)),
      coupling_(coupling),
      schedule_(schedule),
      root_seed_(root_seed),
      patient_key_(patient_key) {}

GaSegmentResult GaRunner::step(const RRSegment& segment, double delta_p_prev) {
  const SeedScope seeds{root_seed_, patient_key_, static_cast<std::uint64_t>(segment.index)};
  int generations = schedule_.generations(delta_p_prev);
  if (population_.empty()) {
    population_ = init_population(config_, seeds(Purpose::kGaInit, 0));
    generations = config_.generations_first;
  }
  evaluate(population_, segment, coupling_, config_, seeds);
  return evolve_segment(population_, segment, generations, coupling_, config_, seeds);
}

}  // namespace avnode
