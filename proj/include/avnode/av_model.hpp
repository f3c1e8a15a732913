#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "avnode/params.hpp"

namespace avnode {

/// Refractory period after a diastolic interval `t_tilde` >= 0 (ms).
double refractory(const PathwayParams& p, double t_tilde);

/// Conduction delay after a diastolic interval `t_tilde` >= 0 (ms).
double delay(const PathwayParams& p, double t_tilde);

/// Fixed properties of the coupling node joining both pathways.
struct CouplingConfig {
  double rp_ms = 300.0;
  double cd_ms = 60.0;
};

/// Coupling-node RP estimate: mean of the ten shortest RR intervals.
/// Throws DataError when fewer than ten intervals are given.
double coupling_rp_from_data(std::span<const double> rr);

/// Per-activation RP/CD values, pooled over all nodes of each pathway.
struct TrackedSamples {
  std::vector<double> r_fp;
  std::vector<double> r_sp;
  std::vector<double> d_fp;
  std::vector<double> d_sp;
};

struct SimulationOptions {
  double duration_ms = 600'000.0;
  bool track = false;
  /// Leading RR intervals dropped from `rr_intervals` (initial transient).
  int warmup_intervals = 10;
};

struct SimulationResult {
  /// Successive ventricular intervals after warm-up (ms).
  std::vector<double> rr_intervals;
  /// All ventricular activation times, warm-up included (ms).
  std::vector<double> ventricular_times;
  std::optional<TrackedSamples> tracked;
  /// Coupling-node transmissions by pathway of origin, whole run.
  long n_fp = 0;
  long n_sp = 0;
  /// Number of atrial impulses generated.
  long n_atrial = 0;
};

/// Event-driven simulation of the 21-node dual-pathway network.
///
/// Topology: two 10-node chains (fast pathway nodes 0-9, slow pathway nodes
/// 10-19) and a coupling node (20) adjacent to the last node of each chain.
/// Atrial impulses from a homogeneous Poisson process of rate `lambda_hz`
/// reach the first node of both chains simultaneously. A non-refractory node
/// forwards the impulse to every neighbour except the one it came from,
/// after its conduction delay, and becomes refractory. Each coupling-node
/// transmission at time t produces a ventricular activation at t + cd_ms.
///
/// Simultaneous events are ordered by target node index, then by source node
/// index, so fast-pathway arrivals win ties at the coupling node. The result
/// is a pure function of the arguments.
SimulationResult simulate(const ModelParameters& theta, const CouplingConfig& coupling, double lambda_hz,
                          std::uint64_t seed, const SimulationOptions& options = {});

/// Poisson arrival times used by simulate() for the given seed; exposed so
/// tests can check the atrial process independently of the network.
std::vector<double> atrial_arrivals(double lambda_hz, double duration_ms, std::uint64_t seed);

}  // namespace avnode
