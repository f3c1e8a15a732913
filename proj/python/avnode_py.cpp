#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "avnode/error.hpp"
#include "avnode/pipeline.hpp"
#include "avnode/poincare.hpp"
#include "avnode/reduction.hpp"
#include "avnode/synth.hpp"
#include "avnode/trends.hpp"

namespace py = pybind11;
using namespace avnode;

namespace {

ParamVector to_params(const std::vector<double>& v) {
  if (v.size() != kNumParams) throw UsageError("theta needs 12 values");
  ParamVector out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

py::array_t<double> to_numpy(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::array_t<std::uint32_t> histogram_array(const PoincareHistogram& h) {
  py::array_t<std::uint32_t> out({PoincareHistogram::kSide, PoincareHistogram::kSide});
  std::copy(h.counts.begin(), h.counts.end(), out.mutable_data());
  return out;
}

PipelineConfig load_config(const std::string& path, const std::optional<std::string>& output) {
  auto c = PipelineConfig::load(path);
  apply_env_overrides(c);
  if (output) c.output_dir = *output;
  return c;
}

py::dict summary_dict(const PropertySummary& s) {
  py::dict d;
  for (std::size_t p = 0; p < kNumProperties; ++p) {
    py::dict entry;
    entry["phi_max"] = s.phi_max[p];
    entry["phi_5"] = s.phi_5[p];
    entry["phi_95"] = s.phi_95[p];
    entry["n"] = s.sample_counts[p];
    d[py::str(std::string(property_name(p)))] = entry;
  }
  d["sp_ratio"] = s.sp_ratio ? py::object(py::float_(*s.sp_ratio)) : py::object(py::none());
  d["n_fp"] = s.n_fp;
  d["n_sp"] = s.n_sp;
  return d;
}

}  // namespace

PYBIND11_MODULE(_avnode, m) {
  m.doc() = "Dual-pathway AV-node model, Poincare metric and property estimation";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<AbcStall>(m, "AbcStall", PyExc_RuntimeError);

  m.def("param_names", [] {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < kNumParams; ++i) out.emplace_back(param_name(i));
    return out;
  });
  m.def("bounds", [](const std::string& which) {
    const auto b = which == "ga" ? ParameterBounds::ga() : ParameterBounds::abc();
    return py::make_tuple(std::vector<double>(b.lo.begin(), b.lo.end()), std::vector<double>(b.hi.begin(), b.hi.end()));
  }, py::arg("which") = "abc");

  m.def("refractory", [](double r_min, double delta_r, double tau_r, double t) {
    return refractory(PathwayParams{r_min, delta_r, tau_r, 0, 0, 1}, t);
  }, py::arg("r_min"), py::arg("delta_r"), py::arg("tau_r"), py::arg("t_tilde"));
  m.def("delay", [](double d_min, double delta_d, double tau_d, double t) {
    return delay(PathwayParams{0, 0, 1, d_min, delta_d, tau_d}, t);
  }, py::arg("d_min"), py::arg("delta_d"), py::arg("tau_d"), py::arg("t_tilde"));

  m.def(
      "simulate",
      [](const std::vector<double>& theta, double lambda_hz, std::uint64_t seed, double duration_ms, double coupling_rp_ms,
         double coupling_cd_ms, bool track) {
        SimulationOptions o;
        o.duration_ms = duration_ms;
        o.track = track;
        SimulationResult r;
        {
          py::gil_scoped_release release;
          r = simulate(ModelParameters::from_array(to_params(theta)), {coupling_rp_ms, coupling_cd_ms}, lambda_hz, seed, o);
        }
        py::dict d;
        d["rr"] = to_numpy(r.rr_intervals);
        d["ventricular_times"] = to_numpy(r.ventricular_times);
        d["n_fp"] = r.n_fp;
        d["n_sp"] = r.n_sp;
        d["n_atrial"] = r.n_atrial;
        if (r.tracked) {
          d["r_fp"] = to_numpy(r.tracked->r_fp);
          d["r_sp"] = to_numpy(r.tracked->r_sp);
          d["d_fp"] = to_numpy(r.tracked->d_fp);
          d["d_sp"] = to_numpy(r.tracked->d_sp);
        }
        return d;
      },
      py::arg("theta"), py::arg("lambda_hz"), py::arg("seed"), py::arg("duration_ms") = 600'000.0,
      py::arg("coupling_rp_ms") = 300.0, py::arg("coupling_cd_ms") = 60.0, py::arg("track") = false);

  m.def("poincare_histogram", [](const std::vector<double>& rr) { return histogram_array(poincare_histogram(rr)); },
        py::arg("rr"));
  m.def("poincare_error",
        [](const std::vector<double>& obs, const std::vector<double>& sim) {
          return poincare_error(poincare_histogram(obs), poincare_histogram(sim));
        },
        py::arg("observed_rr"), py::arg("simulated_rr"));

  m.def("kde_mode", [](const std::vector<double>& v) { return kde_mode(v); }, py::arg("samples"));
  m.def("kde_bandwidth", [](const std::vector<double>& v) { return kde_bandwidth(v); }, py::arg("samples"));
  m.def("percentiles", [](const std::vector<double>& v) { return percentiles(v); }, py::arg("samples"));
  m.def("ks_distance", [](const std::vector<double>& a, const std::vector<double>& b) { return ks_distance(a, b); },
        py::arg("a"), py::arg("b"));
  m.def(
      "spearman",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto r = spearman(x, y);
        return py::make_tuple(r.rho ? py::object(py::float_(*r.rho)) : py::object(py::none()),
                              r.p_value ? py::object(py::float_(*r.p_value)) : py::object(py::none()), r.n);
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "property_summary",
      [](const std::vector<std::vector<double>>& theta, const std::vector<double>& weights, double lambda_hz,
         double coupling_rp_ms, double coupling_cd_ms, std::uint64_t seed, double duration_ms) {
        std::vector<Particle> parts;
        for (std::size_t i = 0; i < theta.size(); ++i) {
          parts.push_back({to_params(theta[i]), i < weights.size() ? weights[i] : 1.0, 0.0});
        }
        PropertySummary s;
        {
          py::gil_scoped_release release;
          const auto samples = reduce(parts, lambda_hz, {coupling_rp_ms, coupling_cd_ms}, SeedScope{seed, 0, 0},
                                      ReductionOptions{duration_ms, 1});
          s = summarize(samples);
        }
        return summary_dict(s);
      },
      py::arg("theta"), py::arg("weights"), py::arg("lambda_hz"), py::arg("coupling_rp_ms") = 300.0,
      py::arg("coupling_cd_ms") = 60.0, py::arg("seed") = 1, py::arg("duration_ms") = 600'000.0);

  m.def(
      "synth",
      [](const std::string& spec_json, std::uint64_t seed, const std::string& out_dir) {
        const auto spec = SyntheticSpec::from_json(nlohmann::json::parse(spec_json));
        const auto files = write_synthetic(spec, synthesize(spec, seed), seed, out_dir);
        return py::make_tuple(files.rr.string(), files.afr.string(), files.truth.string());
      },
      py::arg("spec_json"), py::arg("seed"), py::arg("out_dir"));

  auto command = [&m](const char* name, auto fn) {
    m.def(
        name,
        [fn](const std::string& config, std::optional<std::string> output) {
          const auto c = load_config(config, output);
          std::ostringstream log;
          {
            py::gil_scoped_release release;
            fn(c, log);
          }
          return log.str();
        },
        py::arg("config"), py::arg("output") = py::none());
  };
  command("ingest", [](const PipelineConfig& c, std::ostream& log) { run_ingest(c, log); });
  command("estimate", [](const PipelineConfig& c, std::ostream& log) { run_estimate(c, log); });
  command("reduce", [](const PipelineConfig& c, std::ostream& log) { run_reduce(c, log); });
  command("trends", [](const PipelineConfig& c, std::ostream& log) { run_trends(c, log); });
  command("report", [](const PipelineConfig& c, std::ostream& log) { run_report(c, log); });
}
