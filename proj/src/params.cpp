#include "avnode/params.hpp"

#include <algorithm>
#include <stdexcept>

namespace avnode {

namespace {

constexpr std::array<std::string_view, kNumParams> kNames = {
    "r_min_fp", "delta_r_fp", "tau_r_fp", "d_min_fp", "delta_d_fp", "tau_d_fp",
    "r_min_sp", "delta_r_sp", "tau_r_sp", "d_min_sp", "delta_d_sp", "tau_d_sp"};

// Per-pathway ranges in flat order [R_min, dR, tau_R, D_min, dD, tau_D].
ParameterBounds make_bounds(const std::array<double, 6>& lo, const std::array<double, 6>& hi) {
  ParameterBounds b;
  for (std::size_t i = 0; i < 6; ++i) {
    b.lo[i] = b.lo[i + 6] = lo[i];
    b.hi[i] = b.hi[i + 6] = hi[i];
  }
  return b;
}

}  // namespace

ParamVector ModelParameters::to_array() const {
  return {fp.r_min, fp.delta_r, fp.tau_r, fp.d_min, fp.delta_d, fp.tau_d,
          sp.r_min, sp.delta_r, sp.tau_r, sp.d_min, sp.delta_d, sp.tau_d};
}

ModelParameters ModelParameters::from_array(const ParamVector& v) {
  ModelParameters p;
  p.fp = {v[0], v[1], v[2], v[3], v[4], v[5]};
  p.sp = {v[6], v[7], v[8], v[9], v[10], v[11]};
  return p;
}

std::string_view param_name(std::size_t index) {
  if (index >= kNumParams) throw std::out_of_range("parameter index");
  return kNames[index];
}

bool pathways_ordered(const ParamVector& v) { return v[0] + v[1] >= v[6] + v[7]; }

void order_pathways(ParamVector& v) {
  if (pathways_ordered(v)) return;
  for (std::size_t i = 0; i < 6; ++i) std::swap(v[i], v[i + 6]);
}

ParameterBounds ParameterBounds::ga() {
  return make_bounds({100.0, 0.0, 25.0, 2.0, 0.0, 25.0}, {1000.0, 1000.0, 500.0, 50.0, 100.0, 500.0});
}

ParameterBounds ParameterBounds::abc() {
  return make_bounds({30.0, 0.0, 10.0, 0.1, 0.0, 10.0}, {1300.0, 1300.0, 700.0, 80.0, 130.0, 700.0});
}

bool ParameterBounds::contains(const ParamVector& v) const {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!(v[i] >= lo[i] && v[i] <= hi[i])) return false;
  }
  return true;
}

void ParameterBounds::clamp(ParamVector& v) const {
  for (std::size_t i = 0; i < kNumParams; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
}

}  // namespace avnode
