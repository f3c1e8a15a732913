#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace avnode {

inline constexpr std::size_t kNumParams = 12;

using ParamVector = std::array<double, kNumParams>;

/// Rate-dependent RP and CD dynamics shared by all nodes of one pathway (ms).
struct PathwayParams {
  double r_min = 0.0;
  double delta_r = 0.0;
  double tau_r = 0.0;
  double d_min = 0.0;
  double delta_d = 0.0;
  double tau_d = 0.0;

  bool operator==(const PathwayParams&) const = default;
};

/// The 12-dimensional model parameter vector. Flat order is
/// [R_min, dR, tau_R, D_min, dD, tau_D] for the fast pathway, then the same
/// six for the slow pathway.
struct ModelParameters {
  PathwayParams fp;
  PathwayParams sp;

  ParamVector to_array() const;
  static ModelParameters from_array(const ParamVector& v);

  bool operator==(const ModelParameters&) const = default;
};

/// Names of the flat coordinates, e.g. "r_min_fp".
std::string_view param_name(std::size_t index);

/// The two chains are interchangeable in the model, so labels are fixed by
/// convention: the fast pathway is the one with the longer fully recovered
/// refractory period, R_min + dR.
bool pathways_ordered(const ParamVector& v);

/// Swaps the pathway blocks when they violate the convention above.
void order_pathways(ParamVector& v);

/// Box constraints on the flat parameter vector.
struct ParameterBounds {
  ParamVector lo{};
  ParamVector hi{};

  static ParameterBounds ga();
  static ParameterBounds abc();

  double range(std::size_t i) const { return hi[i] - lo[i]; }
  bool contains(const ParamVector& v) const;
  void clamp(ParamVector& v) const;
};

}  // namespace avnode
