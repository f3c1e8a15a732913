#include "avnode/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "avnode/error.hpp"
#include "avnode/parallel.hpp"
#include "avnode/poincare.hpp"
#include "avnode/seeds.hpp"
#include "avnode/synth.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace avnode {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string segment_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%04d", index);
  return buf;
}

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(); }

double number_or_nan(const nlohmann::json& j) { return j.is_number() ? j.get<double>() : kNaN; }

// Write-then-rename so an interrupted run never leaves a truncated record.
void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

ojson bounds_to_json(const ParameterBounds& b) {
  return {{"lo", std::vector<double>(b.lo.begin(), b.lo.end())}, {"hi", std::vector<double>(b.hi.begin(), b.hi.end())}};
}

ParameterBounds bounds_from_json(const nlohmann::json& j, ParameterBounds fallback) {
  for (const char* key : {"lo", "hi"}) {
    if (!j.contains(key)) continue;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != kNumParams) throw UsageError(std::string("bounds.") + key + " needs 12 values");
    std::copy(v.begin(), v.end(), (key[0] == 'l' ? fallback.lo : fallback.hi).begin());
  }
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!(fallback.lo[i] < fallback.hi[i])) throw UsageError("bounds: lo must be below hi for " + std::string(param_name(i)));
  }
  return fallback;
}

ojson property_object(const PropertyArray& v) {
  ojson j;
  for (std::size_t p = 0; p < kNumProperties; ++p) j[std::string(property_name(p))] = number_or_null(v[p]);
  return j;
}

PropertyArray property_array(const nlohmann::json& j) {
  PropertyArray v{};
  for (std::size_t p = 0; p < kNumProperties; ++p) v[p] = number_or_nan(j.at(std::string(property_name(p))));
  return v;
}

fs::path patient_dir(const PipelineConfig& config, const std::string& id) { return config.output_dir / id; }

std::string samples_csv(const std::string& hash, const std::array<std::vector<double>, kNumProperties>& pools) {
  std::string out = "# config_hash=" + hash + "\nproperty,values\n";
  for (std::size_t p = 0; p < kNumProperties; ++p) {
    out += property_name(p);
    for (double v : pools[p]) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  return out;
}

std::array<std::vector<double>, kNumProperties> parse_samples_csv(const fs::path& path) {
  std::array<std::vector<double>, kNumProperties> pools;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("property,", 0) == 0) continue;
    std::istringstream ls(line);
    std::string name, tok;
    std::getline(ls, name, ',');
    std::size_t p = 0;
    while (p < kNumProperties && property_name(p) != name) ++p;
    if (p == kNumProperties) throw DataError(path.string() + ": unknown property '" + name + "'");
    while (std::getline(ls, tok, ',')) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc()) throw DataError(path.string() + ": malformed sample '" + tok + "'");
      pools[p].push_back(v);
    }
  }
  return pools;
}

// Concatenates per-segment JSON records, in segment order, into one JSON-lines file.
void assemble_jsonl(const fs::path& dir, const std::vector<RRSegment>& segments, const fs::path& out) {
  std::string content;
  for (const auto& seg : segments) {
    const fs::path p = dir / (segment_name(seg.index) + ".json");
    if (!fs::exists(p)) continue;
    content += nlohmann::json::parse(read_file(p)).dump();
    content += '\n';
  }
  write_file(out, content);
}

void check_inputs(const PipelineConfig& config) {
  if (config.patients.empty()) throw UsageError("configuration lists no patients");
  for (const auto& p : config.patients) {
    if (p.id.empty()) throw UsageError("patient with empty id");
    if (!fs::exists(p.rr)) throw DataError("missing RR file for " + p.id + ": " + p.rr.string());
    if (!fs::exists(p.afr)) throw DataError("missing AFR file for " + p.id + ": " + p.afr.string());
  }
}

struct SegmentOutcome {
  bool estimated = false;
  bool skipped = false;
};

SegmentOutcome estimate_segment(const PipelineConfig& config, const std::string& hash, const fs::path& dir,
                                const RRSegment& seg, const CouplingConfig& coupling, std::uint64_t patient_key) {
  const std::string name = segment_name(seg.index);
  const fs::path posterior_path = dir / "posterior" / (name + ".json");
  const fs::path property_path = dir / "properties" / (name + ".json");
  if (fs::exists(posterior_path) && fs::exists(property_path)) return {false, true};

  const SeedScope seeds{config.root_seed, patient_key, static_cast<std::uint64_t>(seg.index)};
  ojson post;
  post["config_hash"] = hash;
  post["patient"] = seg.patient_id;
  post["s"] = seg.index;
  ojson props = post;
  props["start_ms"] = seg.start_ms;
  props["clock_s"] = seg.wall_clock_start_s;
  props["lambda_hat"] = seg.lambda_hat;

  std::string reason;
  try {
    const fs::path ga_path = dir / "ga" / (name + ".json");
    if (!fs::exists(ga_path)) throw DataError("no GA record");
    const auto ga = read_json(ga_path);
    if (ga.value("status", "ok") != "ok") throw DataError(ga.value("reason", "GA skipped segment"));
    std::vector<Individual> ranked;
    for (const auto& r : ga.at("ranked")) {
      Individual ind;
      const auto v = r.at("theta").get<std::vector<double>>();
      std::copy(v.begin(), v.end(), ind.theta.begin());
      ind.eps = number_or_nan(r.at("eps"));
      ranked.push_back(ind);
    }

    AbcSchedule schedule = config.abc;
    schedule.threads = 1;
    const auto abc = run_abc(seg, ranked, coupling, schedule, seeds);

    post["status"] = "ok";
    post["lambda_hat"] = seg.lambda_hat;
    post["coupling_rp_ms"] = coupling.rp_ms;
    post["coupling_cd_ms"] = coupling.cd_ms;
    post["n_particles"] = schedule.n_particles;
    post["n_iterations"] = schedule.n_iterations;
    post["threshold_ranks"] = schedule.threshold_ranks;
    auto th = ojson::array();
    for (double t : abc.thresholds) th.push_back(number_or_null(t));
    post["thresholds"] = th;
    post["proposals"] = abc.proposals;
    post["simulations"] = abc.simulations;
    auto names = ojson::array();
    for (std::size_t i = 0; i < kNumParams; ++i) names.push_back(std::string(param_name(i)));
    post["param_names"] = names;
    auto parts = ojson::array();
    for (const auto& p : abc.population.particles) {
      parts.push_back({{"theta", std::vector<double>(p.theta.begin(), p.theta.end())},
                       {"eps", number_or_null(p.eps)},
                       {"weight", p.weight}});
    }
    post["particles"] = parts;

    ReductionOptions ropts = config.reduction;
    ropts.threads = 1;
    const auto& particles = abc.population.particles;
    auto samples = reduce(particles, seg.lambda_hat, coupling, seeds, ropts);
    const auto summary = summarize(samples);

    std::array<std::vector<double>, kNumProperties> ks;
    for (std::size_t p = 0; p < kNumProperties; ++p) {
      ks[p] = subsample(samples.pools[p], config.ks_cap, seeds(Purpose::kKsSubsample, p));
    }
    if (config.dump_samples) write_file(dir / "raw_samples" / (name + ".csv"), samples_csv(hash, samples.pools));
    write_file(dir / "samples" / (name + ".csv"), samples_csv(hash, ks));

    props["status"] = "ok";
    props["phi_max"] = property_object(summary.phi_max);
    props["phi_5"] = property_object(summary.phi_5);
    props["phi_95"] = property_object(summary.phi_95);
    props["total_cd_max"] = {{"d_fp", number_or_null(kTotalDelayFactor * summary.phi_max[2])},
                             {"d_sp", number_or_null(kTotalDelayFactor * summary.phi_max[3])}};
    props["sp_ratio"] = summary.sp_ratio ? ojson(*summary.sp_ratio) : ojson();
    props["n_fp"] = summary.n_fp;
    props["n_sp"] = summary.n_sp;
    ojson counts;
    for (std::size_t p = 0; p < kNumProperties; ++p) counts[std::string(property_name(p))] = summary.sample_counts[p];
    props["sample_counts"] = counts;
  } catch (const std::exception& e) {
    reason = e.what();
  }

  if (!reason.empty()) {
    post["status"] = "unestimated";
    post["reason"] = reason;
    props["status"] = "unestimated";
    props["reason"] = reason;
  }
  write_file(posterior_path, post.dump() + "\n");
  write_file(property_path, props.dump() + "\n");
  return {reason.empty(), false};
}

// Sequential GA over a patient's segments with checkpointing after each one.
void run_ga_for_patient(const PipelineConfig& config, const std::string& hash, const fs::path& dir,
                        const std::vector<RRSegment>& segments, const CouplingConfig& coupling,
                        std::uint64_t patient_key, std::ostream& log) {
  std::vector<PoincareHistogram> hists;
  hists.reserve(segments.size());
  for (const auto& s : segments) hists.push_back(poincare_histogram(s.rr_intervals));
  std::vector<double> dps;
  for (std::size_t k = 1; k < segments.size(); ++k) dps.push_back(delta_p(hists[k - 1], hists[k]));
  GaConfig gac = config.ga;
  gac.threads = config.threads;
  const auto schedule = GenerationSchedule::from_delta_p(dps, gac);

  GaRunner runner(gac, coupling, schedule, config.root_seed, patient_key);
  const fs::path state_path = dir / "ga_state.json";
  int resume_after = -1;
  if (fs::exists(state_path)) {
    const auto state = read_json(state_path);
    if (state.value("config_hash", "") == hash) {
      resume_after = state.at("last_segment").get<int>();
      std::vector<Individual> pop;
      for (const auto& r : state.at("population")) {
        Individual ind;
        const auto v = r.at("theta").get<std::vector<double>>();
        std::copy(v.begin(), v.end(), ind.theta.begin());
        ind.eps = number_or_nan(r.at("eps"));
        pop.push_back(ind);
      }
      runner.set_population(std::move(pop));
    }
  }

  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& seg = segments[k];
    if (seg.index <= resume_after) continue;
    const fs::path rec_path = dir / "ga" / (segment_name(seg.index) + ".json");
    ojson rec;
    rec["config_hash"] = hash;
    rec["patient"] = seg.patient_id;
    rec["s"] = seg.index;
    rec["lambda_hat"] = seg.lambda_hat;
    rec["coupling_rp_ms"] = coupling.rp_ms;
    if (seg.rr_intervals.size() < 2) {
      rec["status"] = "skipped";
      rec["reason"] = "fewer than two valid RR intervals";
      log << "  " << segment_name(seg.index) << ": skipped by GA (no usable RR intervals)\n";
    } else {
      const double dp = k == 0 ? kNaN : dps[k - 1];
      const auto res = runner.step(seg, dp);
      rec["status"] = "ok";
      rec["delta_p_prev"] = number_or_null(dp);
      rec["generations"] = res.generations;
      auto ranked = ojson::array();
      for (std::size_t r = 0; r < res.ranked.size(); ++r) {
        ranked.push_back({{"rank", r + 1},
                          {"eps", number_or_null(res.ranked[r].eps)},
                          {"theta", std::vector<double>(res.ranked[r].theta.begin(), res.ranked[r].theta.end())}});
      }
      rec["ranked"] = ranked;
    }
    write_file(rec_path, rec.dump() + "\n");

    ojson state;
    state["config_hash"] = hash;
    state["last_segment"] = seg.index;
    auto pop = ojson::array();
    for (const auto& ind : runner.population()) {
      pop.push_back({{"theta", std::vector<double>(ind.theta.begin(), ind.theta.end())}, {"eps", number_or_null(ind.eps)}});
    }
    state["population"] = pop;
    write_file(state_path, state.dump() + "\n");
  }
}

std::vector<RRSegment> selected_segments(const PipelineConfig& config, std::vector<RRSegment> segments) {
  if (!config.segment_indices.empty()) {
    std::erase_if(segments, [&](const RRSegment& s) {
      return std::find(config.segment_indices.begin(), config.segment_indices.end(), s.index) ==
             config.segment_indices.end();
    });
  }
  if (config.max_segments > 0 && segments.size() > static_cast<std::size_t>(config.max_segments)) {
    segments.resize(static_cast<std::size_t>(config.max_segments));
  }
  return segments;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  PipelineConfig c;
  for (const auto& p : j.value("patients", nlohmann::json::array())) {
    c.patients.push_back({p.at("id").get<std::string>(), resolve(p.at("rr").get<std::string>()),
                          resolve(p.at("afr").get<std::string>())});
  }
  if (j.contains("outcomes") && !j["outcomes"].is_null()) c.outcomes = resolve(j["outcomes"].get<std::string>());
  if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
  c.root_seed = j.value("root_seed", c.root_seed);
  c.threads = j.value("threads", c.threads);
  c.coupling_cd_ms = j.value("coupling_cd_ms", c.coupling_cd_ms);
  c.ks_cap = j.value("ks_cap", c.ks_cap);
  c.max_segments = j.value("max_segments", c.max_segments);
  c.segment_indices = j.value("segment_indices", c.segment_indices);
  c.dump_samples = j.value("dump_samples", c.dump_samples);
  if (j.contains("ga")) {
    const auto& g = j["ga"];
    auto& ga = c.ga;
    ga.population_size = g.value("population_size", ga.population_size);
    ga.tournament_size = g.value("tournament_size", ga.tournament_size);
    ga.crossover_rate = g.value("crossover_rate", ga.crossover_rate);
    ga.mutation_rate = g.value("mutation_rate", ga.mutation_rate);
    ga.mutation_width = g.value("mutation_width", ga.mutation_width);
    ga.immigration_count = g.value("immigration_count", ga.immigration_count);
    ga.elite_count = g.value("elite_count", ga.elite_count);
    ga.generations_min = g.value("generations_min", ga.generations_min);
    ga.generations_max = g.value("generations_max", ga.generations_max);
    ga.generations_first = g.value("generations_first", ga.generations_first);
    ga.ranked_count = g.value("ranked_count", ga.ranked_count);
    ga.simulation_ms = g.value("simulation_ms", ga.simulation_ms);
    if (g.contains("bounds")) ga.bounds = bounds_from_json(g["bounds"], ga.bounds);
  }
  if (j.contains("abc")) {
    const auto& a = j["abc"];
    auto& abc = c.abc;
    abc.n_particles = a.value("n_particles", abc.n_particles);
    abc.n_iterations = a.value("n_iterations", abc.n_iterations);
    abc.n_centers = a.value("n_centers", abc.n_centers);
    abc.threshold_ranks = a.value("threshold_ranks", abc.threshold_ranks);
    abc.max_simulations_per_slot = a.value("max_simulations_per_slot", abc.max_simulations_per_slot);
    abc.max_draws_per_slot = a.value("max_draws_per_slot", abc.max_draws_per_slot);
    abc.simulation_ms = a.value("simulation_ms", abc.simulation_ms);
    abc.ordered_pathways = a.value("ordered_pathways", abc.ordered_pathways);
    if (a.contains("bounds")) abc.bounds = bounds_from_json(a["bounds"], abc.bounds);
  }
  if (j.contains("reduction")) c.reduction.simulation_ms = j["reduction"].value("simulation_ms", c.reduction.simulation_ms);

  if (c.ga.population_size < c.ga.ranked_count || c.ga.ranked_count < 1) {
    throw UsageError("GA population must hold at least ranked_count individuals");
  }
  if (c.ga.generations_min < 0 || c.ga.generations_max < c.ga.generations_min) throw UsageError("bad GA generation range");
  c.abc.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(file.string() + ": " + e.what());
  }
  return from_json(j, file.parent_path());
}

nlohmann::json PipelineConfig::to_json() const {
  ojson j;
  auto pats = ojson::array();
  for (const auto& p : patients) pats.push_back({{"id", p.id}, {"rr", p.rr.string()}, {"afr", p.afr.string()}});
  j["patients"] = pats;
  j["outcomes"] = outcomes.empty() ? ojson() : ojson(outcomes.string());
  j["output_dir"] = output_dir.string();
  j["root_seed"] = root_seed;
  j["threads"] = threads;
  j["coupling_cd_ms"] = coupling_cd_ms;
  j["ks_cap"] = ks_cap;
  j["max_segments"] = max_segments;
  j["segment_indices"] = segment_indices;
  j["dump_samples"] = dump_samples;
  j["ga"] = {{"population_size", ga.population_size},
             {"tournament_size", ga.tournament_size},
             {"crossover_rate", ga.crossover_rate},
             {"mutation_rate", ga.mutation_rate},
             {"mutation_width", ga.mutation_width},
             {"immigration_count", ga.immigration_count},
             {"elite_count", ga.elite_count},
             {"generations_min", ga.generations_min},
             {"generations_max", ga.generations_max},
             {"generations_first", ga.generations_first},
             {"ranked_count", ga.ranked_count},
             {"simulation_ms", ga.simulation_ms},
             {"bounds", bounds_to_json(ga.bounds)}};
  j["abc"] = {{"n_particles", abc.n_particles},
              {"n_iterations", abc.n_iterations},
              {"n_centers", abc.n_centers},
              {"threshold_ranks", abc.threshold_ranks},
              {"max_simulations_per_slot", abc.max_simulations_per_slot},
              {"max_draws_per_slot", abc.max_draws_per_slot},
              {"simulation_ms", abc.simulation_ms},
              {"ordered_pathways", abc.ordered_pathways},
              {"bounds", bounds_to_json(abc.bounds)}};
  j["reduction"] = {{"simulation_ms", reduction.simulation_ms}};
  return j;
}

std::string PipelineConfig::hash() const {
  auto j = to_json();
  j.erase("patients");
  j.erase("outcomes");
  j.erase("output_dir");
  j.erase("threads");
  j.erase("dump_samples");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

void apply_env_overrides(PipelineConfig& config) {
  if (const char* dir = std::getenv("AVNODE_OUTPUT_DIR"); dir && *dir) config.output_dir = dir;
}

IngestedPatient ingest_patient(const PatientInput& input, double coupling_cd_ms) {
  IngestedPatient out;
  out.beats = parse_beats(input.rr, input.id);
  const auto trend = parse_afr(input.afr);
  out.segments = attach_afr(segment(out.beats), trend);
  out.covered_ms = covered_duration_ms(out.segments);
  out.accepted = check_patient_duration(out.segments);
  const auto intervals = out.beats.valid_intervals();
  out.coupling.cd_ms = coupling_cd_ms;
  out.coupling.rp_ms = intervals.size() >= 10 ? coupling_rp_from_data(intervals) : kNaN;
  if (out.accepted && !(out.coupling.rp_ms > 0.0)) out.accepted = false;
  return out;
}

void run_ingest(const PipelineConfig& config, std::ostream& log) {
  check_inputs(config);
  for (const auto& p : config.patients) {
    const auto ing = ingest_patient(p, config.coupling_cd_ms);
    std::ostringstream manifest;
    write_segment_manifest(manifest, ing.segments);
    write_file(patient_dir(config, p.id) / "segments.jsonl", manifest.str());
    log << p.id << ": " << ing.segments.size() << " segments, " << std::fixed << std::setprecision(1)
        << ing.covered_ms / 3.6e6 << " h covered, " << (ing.accepted ? "accepted" : "rejected (< 12 h)") << '\n';
    log.unsetf(std::ios::floatfield);
  }
}

EstimateSummary run_estimate(const PipelineConfig& config, std::ostream& log) {
  check_inputs(config);
  const std::string hash = config.hash();
  EstimateSummary summary;
  ojson meta;
  meta["config_hash"] = hash;
  meta["config"] = config.to_json();
  meta["seed_scheme"] = "splitmix64 chain over (root_seed, fnv1a64(patient), segment, purpose, replicate)";
  meta["root_seed"] = config.root_seed;
  auto pats = ojson::array();

  for (const auto& p : config.patients) {
    const auto ing = ingest_patient(p, config.coupling_cd_ms);
    const fs::path dir = patient_dir(config, p.id);
    ojson pm;
    pm["id"] = p.id;
    pm["accepted"] = ing.accepted;
    pm["covered_hours"] = ing.covered_ms / 3.6e6;
    pm["coupling_rp_ms"] = number_or_null(ing.coupling.rp_ms);
    pm["patient_key"] = fnv1a64(p.id);
    if (!ing.accepted) {
      ++summary.patients_rejected;
      log << p.id << ": rejected (" << ing.covered_ms / 3.6e6 << " h of usable segments)\n";
      pats.push_back(pm);
      continue;
    }
    ++summary.patients_accepted;
    const auto segments = selected_segments(config, ing.segments);
    pm["n_segments"] = segments.size();
    pats.push_back(pm);
    {
      std::ostringstream manifest;
      write_segment_manifest(manifest, segments);
      write_file(dir / "segments.jsonl", manifest.str());
    }
    log << p.id << ": " << segments.size() << " segments, coupling RP " << ing.coupling.rp_ms << " ms\n";

    const std::uint64_t key = fnv1a64(p.id);
    run_ga_for_patient(config, hash, dir, segments, ing.coupling, key, log);

    std::vector<SegmentOutcome> outcomes(segments.size());
    parallel_for(segments.size(), config.threads, [&](std::size_t k) {
      outcomes[k] = estimate_segment(config, hash, dir, segments[k], ing.coupling, key);
    });
    for (std::size_t k = 0; k < segments.size(); ++k) {
      if (outcomes[k].skipped) {
        ++summary.segments_skipped;
      } else if (outcomes[k].estimated) {
        ++summary.segments_estimated;
      } else {
        ++summary.segments_failed;
        log << "  " << segment_name(segments[k].index) << ": unestimated\n";
      }
    }
    assemble_jsonl(dir / "ga", segments, dir / "ga.jsonl");
    assemble_jsonl(dir / "posterior", segments, dir / "posterior.jsonl");
    assemble_jsonl(dir / "properties", segments, dir / "properties.jsonl");
  }
  meta["patients"] = pats;
  write_file(config.output_dir / "run.json", meta.dump(2) + "\n");
  log << "estimated " << summary.segments_estimated << ", unestimated " << summary.segments_failed << ", reused "
      << summary.segments_skipped << " segments\n";
  return summary;
}

void run_reduce(const PipelineConfig& config, std::ostream& log) {
  const std::string hash = config.hash();
  for (const auto& p : config.patients) {
    const fs::path dir = patient_dir(config, p.id);
    const fs::path posterior = dir / "posterior.jsonl";
    if (!fs::exists(posterior)) {
      log << p.id << ": no posterior file, skipped\n";
      continue;
    }
    std::map<int, nlohmann::json> manifest;
    {
      std::istringstream in(read_file(dir / "segments.jsonl"));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        manifest[j.at("s").get<int>()] = j;
      }
    }
    const auto ing_start_clock = parse_beats(p.rr, p.id).start_clock_s;
    std::istringstream in(read_file(posterior));
    std::string line;
    std::vector<nlohmann::json> records;
    while (std::getline(in, line)) {
      if (!line.empty()) records.push_back(nlohmann::json::parse(line));
    }
    std::string out;
    std::vector<std::string> lines(records.size());
    parallel_for(records.size(), config.threads, [&](std::size_t i) {
      const auto& rec = records[i];
      const int s = rec.at("s").get<int>();
      const std::string name = segment_name(s);
      ojson props;
      props["config_hash"] = hash;
      props["patient"] = p.id;
      props["s"] = s;
      const double start_ms = manifest.count(s) ? manifest[s].at("start").get<double>() : kNaN;
      props["start_ms"] = start_ms;
      props["clock_s"] = std::fmod(ing_start_clock + start_ms / 1000.0, 86400.0);
      props["lambda_hat"] = rec.value("lambda_hat", kNaN);
      if (rec.value("status", "") != "ok") {
        props["status"] = "unestimated";
        props["reason"] = rec.value("reason", "no posterior");
        lines[i] = props.dump();
        return;
      }
      std::vector<Particle> particles;
      for (const auto& pj : rec.at("particles")) {
        Particle part;
        const auto v = pj.at("theta").get<std::vector<double>>();
        std::copy(v.begin(), v.end(), part.theta.begin());
        part.weight = pj.at("weight").get<double>();
        part.eps = number_or_nan(pj.at("eps"));
        particles.push_back(part);
      }
      const CouplingConfig coupling{rec.at("coupling_rp_ms").get<double>(), rec.at("coupling_cd_ms").get<double>()};
      const SeedScope seeds{config.root_seed, fnv1a64(p.id), static_cast<std::uint64_t>(s)};
      ReductionOptions ropts = config.reduction;
      ropts.threads = 1;
      const auto samples = reduce(particles, rec.at("lambda_hat").get<double>(), coupling, seeds, ropts);
      const auto summary = summarize(samples);
      std::array<std::vector<double>, kNumProperties> ks;
      for (std::size_t q = 0; q < kNumProperties; ++q) {
        ks[q] = subsample(samples.pools[q], config.ks_cap, seeds(Purpose::kKsSubsample, q));
      }
      write_file(dir / "samples" / (name + ".csv"), samples_csv(hash, ks));
      if (config.dump_samples) write_file(dir / "raw_samples" / (name + ".csv"), samples_csv(hash, samples.pools));
      props["status"] = "ok";
      props["phi_max"] = property_object(summary.phi_max);
      props["phi_5"] = property_object(summary.phi_5);
      props["phi_95"] = property_object(summary.phi_95);
      props["total_cd_max"] = {{"d_fp", number_or_null(kTotalDelayFactor * summary.phi_max[2])},
                               {"d_sp", number_or_null(kTotalDelayFactor * summary.phi_max[3])}};
      props["sp_ratio"] = summary.sp_ratio ? ojson(*summary.sp_ratio) : ojson();
      props["n_fp"] = summary.n_fp;
      props["n_sp"] = summary.n_sp;
      ojson counts;
      for (std::size_t q = 0; q < kNumProperties; ++q) counts[std::string(property_name(q))] = summary.sample_counts[q];
      props["sample_counts"] = counts;
      lines[i] = props.dump();
    });
    for (const auto& l : lines) out += l + "\n";
    write_file(dir / "properties.jsonl", out);
    log << p.id << ": reduced " << records.size() << " segments\n";
  }
}

TrendSeries load_trend(const fs::path& dir, const std::string& patient_id) {
  TrendSeries series;
  series.patient_id = patient_id;
  const fs::path props = dir / "properties.jsonl";
  if (!fs::exists(props)) return series;
  std::istringstream in(read_file(props));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.value("status", "") != "ok") continue;
    TrendPoint pt;
    pt.index = j.at("s").get<int>();
    pt.start_ms = j.at("start_ms").get<double>();
    pt.clock_s = j.at("clock_s").get<double>();
    pt.summary.phi_max = property_array(j.at("phi_max"));
    pt.summary.phi_5 = property_array(j.at("phi_5"));
    pt.summary.phi_95 = property_array(j.at("phi_95"));
    if (j.at("sp_ratio").is_number()) pt.summary.sp_ratio = j.at("sp_ratio").get<double>();
    pt.summary.n_fp = j.value("n_fp", 0L);
    pt.summary.n_sp = j.value("n_sp", 0L);
    const fs::path sp = dir / "samples" / (segment_name(pt.index) + ".csv");
    if (fs::exists(sp)) pt.samples = parse_samples_csv(sp);
    series.points.push_back(std::move(pt));
  }
  std::sort(series.points.begin(), series.points.end(),
            [](const TrendPoint& a, const TrendPoint& b) { return a.start_ms < b.start_ms; });
  return series;
}

OutcomeTable parse_outcomes(std::istream& in) {
  OutcomeTable table;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) fields.push_back(tok);
    if (line.back() == ',') fields.emplace_back();
    if (!header) {
      if (fields.size() < 2 || fields[0] != "patient") {
        throw DataError("outcomes: expected header 'patient,<outcome>...' (line " + std::to_string(line_no) + ")");
      }
      table.names.assign(fields.begin() + 1, fields.end());
      header = true;
      continue;
    }
    if (fields.size() != table.names.size() + 1 || fields[0].empty()) {
      throw DataError("outcomes: malformed row (line " + std::to_string(line_no) + ")");
    }
    std::vector<double> values;
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const auto& f = fields[k];
      if (f.empty() || f == "NA" || f == "nan") {
        values.push_back(kNaN);
        continue;
      }
      double v = 0.0;
      const char* first = f.data() + (f[0] == '+' ? 1 : 0);
      const auto [ptr, ec] = std::from_chars(first, f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw DataError("outcomes: malformed value '" + f + "' (line " + std::to_string(line_no) + ")");
      }
      values.push_back(v);
    }
    table.rows.emplace_back(fields[0], std::move(values));
  }
  return table;
}

void run_trends(const PipelineConfig& config, std::ostream& log) {
  const std::string hash = config.hash();
  std::vector<PatientMetrics> metrics;
  for (const auto& p : config.patients) {
    const auto series = load_trend(patient_dir(config, p.id), p.id);
    if (series.points.empty()) {
      log << p.id << ": no estimated segments, excluded from trends\n";
      continue;
    }
    metrics.push_back(patient_metrics(series));
  }
  if (metrics.empty()) throw DataError("no patients with estimated segments");

  const std::string banner = "# config_hash=" + hash + "\n";
  {
    std::ostringstream os;
    os << banner << std::setprecision(10);
    write_patient_metrics_csv(os, metrics);
    write_file(config.output_dir / "patient_metrics.csv", os.str());
  }
  {
    std::ostringstream os;
    os << banner << std::setprecision(10);
    write_cohort_csv(os, cohort_table(metrics));
    write_file(config.output_dir / "cohort_summary.csv", os.str());
  }

  const fs::path corr_path = config.output_dir / "correlations.csv";
  if (config.outcomes.empty()) {
    log << "no outcomes file configured; correlation report skipped\n";
    return;
  }
  std::ifstream in(config.outcomes);
  if (!in) throw DataError("cannot open outcomes file " + config.outcomes.string());
  const auto outcomes = parse_outcomes(in);
  if (outcomes.rows.empty()) {
    log << "outcomes file has no rows; correlation report skipped\n";
    return;
  }
  std::ostringstream os;
  os << banner << std::setprecision(10) << "metric,outcome,rho,p,n\n";
  struct Metric {
    std::string name;
    std::vector<double> values;
  };
  std::vector<Metric> cols;
  for (std::size_t q = 0; q < kNumProperties; ++q) {
    for (const char* kind : {"delta_dv", "mean_delta_ks"}) {
      Metric m{std::string(kind) + "_" + std::string(property_name(q)), {}};
      cols.push_back(m);
    }
  }
  for (std::size_t o = 0; o < outcomes.names.size(); ++o) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::size_t q = c / 2;
      const bool dv = c % 2 == 0;
      std::vector<double> x, y;
      for (const auto& m : metrics) {
        const auto& src = dv ? m.delta_dv : m.mean_delta_ks;
        const auto row = std::find_if(outcomes.rows.begin(), outcomes.rows.end(),
                                      [&](const auto& r) { return r.first == m.patient_id; });
        x.push_back(src ? (*src)[q] : kNaN);
        y.push_back(row != outcomes.rows.end() ? row->second[o] : kNaN);
      }
      const auto r = spearman(x, y);
      os << cols[c].name << ',' << outcomes.names[o] << ',';
      if (r.rho) os << *r.rho; else os << "NA";
      os << ',';
      if (r.p_value) os << *r.p_value; else os << "NA";
      os << ',' << r.n << '\n';
    }
  }
  write_file(corr_path, os.str());
}

void run_report(const PipelineConfig& config, std::ostream& out) {
  out << "output directory: " << config.output_dir.string() << "\nconfig hash: " << config.hash() << '\n';
  for (const auto& p : config.patients) {
    const fs::path props = patient_dir(config, p.id) / "properties.jsonl";
    if (!fs::exists(props)) {
      out << p.id << ": not estimated\n";
      continue;
    }
    int ok = 0, failed = 0;
    PropertyArray sum{};
    double sp = 0.0;
    int sp_n = 0;
    std::istringstream in(read_file(props));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (j.value("status", "") != "ok") {
        ++failed;
        continue;
      }
      ++ok;
      const auto phi = property_array(j.at("phi_max"));
      for (std::size_t q = 0; q < kNumProperties; ++q) sum[q] += phi[q];
      if (j.at("sp_ratio").is_number()) {
        sp += j.at("sp_ratio").get<double>();
        ++sp_n;
      }
    }
    out << p.id << ": " << ok << " segments estimated, " << failed << " unestimated";
    if (ok > 0) {
      out << std::fixed << std::setprecision(1) << "; mean phi_max R_FP " << sum[0] / ok << " R_SP " << sum[1] / ok
          << " D_FP " << sum[2] / ok << " D_SP " << sum[3] / ok << " ms";
      if (sp_n) out << std::setprecision(2) << ", SP ratio " << sp / sp_n;
      out.unsetf(std::ios::floatfield);
    }
    out << '\n';
  }
}

}  // namespace avnode
