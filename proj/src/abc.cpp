#include "avnode/abc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <random>
#include <string>

#include "avnode/error.hpp"
#include "avnode/ingest.hpp"
#include "avnode/parallel.hpp"

namespace avnode {

namespace {

constexpr std::uint64_t kIterationStride = 1'000'000;

Eigen::VectorXd to_vector(const ParamVector& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), kNumParams); }

ParamVector to_params(const Eigen::VectorXd& v) {
  ParamVector out{};
  for (std::size_t i = 0; i < kNumParams; ++i) out[i] = v[static_cast<Eigen::Index>(i)];
  return out;
}

// Gaussian with a fixed covariance; factorized once.
class Gaussian {
 public:
  explicit Gaussian(const Eigen::MatrixXd& cov) : llt_(cov) {
    if (llt_.info() != Eigen::Success) throw std::runtime_error("kernel covariance is not positive definite");
    const auto& l = llt_.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i) log_det += 2.0 * std::log(l(i, i));
    log_norm_ = -0.5 * (static_cast<double>(cov.rows()) * std::log(2.0 * std::numbers::pi) + log_det);
    lower_ = llt_.matrixL();
  }

  double log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean) const {
    const Eigen::VectorXd z = llt_.matrixL().solve(x - mean);
    return log_norm_ - 0.5 * z.squaredNorm();
  }

  template <typename Rng>
  Eigen::VectorXd draw(const Eigen::VectorXd& mean, Rng& rng) const {
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = n01(rng);
    return mean + lower_ * z;
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd lower_;
  double log_norm_ = 0.0;
};

double log_sum_weighted_density(const Eigen::VectorXd& candidate, const std::vector<Eigen::VectorXd>& previous,
                                const std::vector<double>& previous_weights, const Gaussian& kernel) {
  std::vector<double> terms;
  terms.reserve(previous.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < previous.size(); ++k) {
    if (!(previous_weights[k] > 0.0)) continue;
    const double t = std::log(previous_weights[k]) + kernel.log_density(previous[k], candidate);
    terms.push_back(t);
    top = std::max(top, t);
  }
  if (!std::isfinite(top)) {
    throw std::runtime_error("importance weight undefined: all kernel densities vanish; inspect the kernel covariance");
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

std::size_t pick_weighted(const std::vector<double>& cumulative, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, cumulative.back());
  const double x = u(rng);
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

Eigen::MatrixXd kernel_of(const std::vector<Particle>& particles, const ParameterBounds& bounds) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(particles.size()), static_cast<Eigen::Index>(kNumParams));
  for (std::size_t i = 0; i < particles.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = to_vector(particles[i].theta);
  return regularize_covariance(2.0 * sample_covariance(x), bounds);
}

}  // namespace

void AbcSchedule::validate() const {
  if (n_particles <= 0 || n_centers <= 0 || n_particles % n_centers != 0) {
    throw UsageError("n_particles must be a positive multiple of n_centers");
  }
  if (n_iterations < 1) throw UsageError("n_iterations must be at least 1");
  if (static_cast<int>(threshold_ranks.size()) != n_iterations) {
    throw UsageError("threshold_ranks needs one entry per iteration");
  }
  for (int r : threshold_ranks) {
    if (r < 1) throw UsageError("threshold ranks are 1-based");
  }
  if (max_simulations_per_slot <= 0 || max_draws_per_slot <= 0) throw UsageError("ABC stall guards must be positive");
}

std::vector<double> AbcSchedule::thresholds(const std::vector<Individual>& ga_ranked) const {
  std::vector<double> out;
  for (int r : threshold_ranks) {
    if (static_cast<std::size_t>(r) > ga_ranked.size()) {
      throw UsageError("threshold rank " + std::to_string(r) + " exceeds GA output size");
    }
    out.push_back(ga_ranked[static_cast<std::size_t>(r - 1)].eps);
  }
  return out;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  if (n < 2) return Eigen::MatrixXd::Zero(x.cols(), x.cols());
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(n - 1);
}

Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& cov, const ParameterBounds& bounds) {
  auto positive_definite = [](const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::MatrixXd l = llt.matrixL();
    return (l.diagonal().array() > 0.0).all() && l.allFinite();
  };
  if (positive_definite(cov)) return cov;
  Eigen::VectorXd jitter(cov.rows());
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    const double r = bounds.range(static_cast<std::size_t>(i)) / 12.0;
    jitter[i] = 1e-6 * r * r;
  }
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::MatrixXd out = cov;
    out.diagonal() += jitter;
    if (positive_definite(out)) return out;
    jitter *= 10.0;
  }
  throw std::runtime_error("covariance could not be regularized");
}

double log_normal_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  return Gaussian(cov).log_density(x, mean);
}

double log_importance_weight(const Eigen::VectorXd& candidate, const std::vector<Eigen::VectorXd>& previous,
                             const std::vector<double>& previous_weights, const Eigen::MatrixXd& cov) {
  return -log_sum_weighted_density(candidate, previous, previous_weights, Gaussian(cov));
}

double update_weight(const Eigen::VectorXd& candidate, const std::vector<Eigen::VectorXd>& previous,
                     const std::vector<double>& previous_weights, const Eigen::MatrixXd& cov) {
  return std::exp(log_importance_weight(candidate, previous, previous_weights, cov));
}

std::vector<double> normalize_log_weights(const std::vector<double>& log_w) {
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(log_w.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) sum += (w[i] = std::exp(log_w[i] - top));
  for (double& x : w) x /= sum;
  return w;
}

AbcPopulation init_particles(const std::vector<Individual>& ga_ranked, const AbcSchedule& schedule,
                             std::uint64_t seed) {
  schedule.validate();
  if (ga_ranked.size() < static_cast<std::size_t>(schedule.n_centers)) {
    throw UsageError("not enough GA individuals to seed the ABC population");
  }
  std::vector<ParamVector> ga_theta;
  for (const auto& ind : ga_ranked) {
    ga_theta.push_back(ind.theta);
    if (schedule.ordered_pathways) order_pathways(ga_theta.back());
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ga_theta.size()), static_cast<Eigen::Index>(kNumParams));
  for (std::size_t i = 0; i < ga_theta.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = to_vector(ga_theta[i]);
  const Gaussian spread(regularize_covariance(sample_covariance(x), schedule.bounds));

  std::mt19937_64 rng(seed);
  AbcPopulation pop;
  const int per_center = schedule.n_particles / schedule.n_centers;
  const double w0 = 1.0 / schedule.n_particles;
  for (int u = 0; u < schedule.n_centers; ++u) {
    const Eigen::VectorXd center = to_vector(ga_theta[static_cast<std::size_t>(u)]);
    for (int q = 0; q < per_center; ++q) {
      ParamVector theta{};
      long tries = 0;
      do {
        if (++tries > schedule.max_draws_per_slot) throw AbcStall("initial ABC draw never landed inside the bounds");
        theta = to_params(spread.draw(center, rng));
      } while (!schedule.admissible(theta));
      pop.particles.push_back({theta, w0, std::numeric_limits<double>::quiet_NaN()});
    }
  }
  pop.kernel = kernel_of(pop.particles, schedule.bounds);
  return pop;
}

AbcResult run_abc(const RRSegment& segment, const std::vector<Individual>& ga_ranked, const CouplingConfig& coupling,
                  const AbcSchedule& schedule, const SeedScope& seeds) {
  schedule.validate();
  return run_abc_with_thresholds(segment, ga_ranked, coupling, schedule, schedule.thresholds(ga_ranked), seeds);
}

AbcResult run_abc_with_thresholds(const RRSegment& segment, const std::vector<Individual>& ga_ranked,
                                  const CouplingConfig& coupling, const AbcSchedule& schedule,
                                  const std::vector<double>& thresholds, const SeedScope& seeds) {
  schedule.validate();
  if (static_cast<int>(thresholds.size()) != schedule.n_iterations) {
    throw UsageError("need one threshold per ABC iteration");
  }
  if (!(segment.lambda_hat > 0.0)) throw UsageError("segment has no atrial rate attached");

  AbcResult result;
  result.thresholds = thresholds;
  result.population = init_particles(ga_ranked, schedule, seeds(Purpose::kAbcInit, 0));
  result.proposals.push_back(schedule.n_particles);
  result.simulations.push_back(0);

  const auto observed = poincare_histogram(segment.rr_intervals);
  const auto n = static_cast<std::size_t>(schedule.n_particles);

  for (int j = 2; j <= schedule.n_iterations; ++j) {
    const auto& prev = result.population;
    const double threshold = thresholds[static_cast<std::size_t>(j - 1)];
    const Gaussian kernel(prev.kernel);

    std::vector<Eigen::VectorXd> prev_theta;
    std::vector<double> prev_w;
    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& p : prev.particles) {
      prev_theta.push_back(to_vector(p.theta));
      prev_w.push_back(p.weight);
      cumulative.push_back(acc += p.weight);
    }

    std::vector<Particle> next(n);
    std::vector<long> tries(n, 0);
    std::vector<long> sims(n, 0);
    parallel_for(n, schedule.threads, [&](std::size_t v) {
      std::mt19937_64 rng(seeds(Purpose::kAbcSlot, static_cast<std::uint64_t>(j) * kIterationStride + v));
      for (;;) {
        if (++tries[v] > schedule.max_draws_per_slot) {
          throw AbcStall("ABC iteration " + std::to_string(j) + " stalled: " +
                         std::to_string(schedule.max_draws_per_slot) + " draws without an accepted particle");
        }
        const std::size_t pick = pick_weighted(cumulative, rng);
        const ParamVector proposal = to_params(kernel.draw(prev_theta[pick], rng));
        const std::uint64_t sim_seed = rng();
        if (!schedule.admissible(proposal)) continue;
        if (++sims[v] > schedule.max_simulations_per_slot) {
          throw AbcStall("ABC iteration " + std::to_string(j) + " stalled: " +
                         std::to_string(schedule.max_simulations_per_slot) + " simulations without an accepted particle");
        }
        const double eps =
            evaluate_theta(proposal, observed, coupling, segment.lambda_hat, schedule.simulation_ms, sim_seed);
        if (eps <= threshold) {
          next[v] = {proposal, 0.0, eps};
          return;
        }
      }
    });

    std::vector<double> log_w(n);
    for (std::size_t v = 0; v < n; ++v) {
      log_w[v] = -log_sum_weighted_density(to_vector(next[v].theta), prev_theta, prev_w, kernel);
    }
    const auto w = normalize_log_weights(log_w);
    for (std::size_t v = 0; v < n; ++v) next[v].weight = w[v];

    long total = 0;
    for (long t : tries) total += t;
    result.proposals.push_back(total);
    result.simulations.push_back(std::accumulate(sims.begin(), sims.end(), 0L));

    AbcPopulation updated;
    updated.particles = std::move(next);
    updated.kernel = kernel_of(updated.particles, schedule.bounds);
    result.population = std::move(updated);
  }
  return result;
}

}  // namespace avnode
