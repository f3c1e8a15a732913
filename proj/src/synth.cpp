#include "avnode/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "avnode/error.hpp"
#include "avnode/seeds.hpp"

namespace avnode {

namespace {

constexpr double kHourMs = 3'600'000.0;

std::string format_clock(double seconds) {
  const int s = static_cast<int>(std::lround(seconds)) % 86400;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", s / 3600, (s / 60) % 60, s % 60);
  return buf;
}

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

nlohmann::json theta_to_json(const ModelParameters& theta) {
  nlohmann::ordered_json j;
  const auto v = theta.to_array();
  for (std::size_t i = 0; i < kNumParams; ++i) j[std::string(param_name(i))] = v[i];
  return j;
}

ModelParameters theta_from_json(const nlohmann::json& j) {
  ParamVector v{};
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto key = std::string(param_name(i));
    if (!j.contains(key)) throw UsageError("theta is missing '" + key + "'");
    v[i] = j.at(key).get<double>();
  }
  return ModelParameters::from_array(v);
}

void SyntheticSpec::validate() const {
  if (!(duration_hours > 0.0)) throw UsageError("synthetic duration must be positive");
  if (!(lambda_hz > 0.0)) throw UsageError("synthetic atrial rate must be positive");
  if (!(coupling.rp_ms > 0.0) || coupling.cd_ms < 0.0) throw UsageError("invalid coupling configuration");
  const auto abc = ParameterBounds::abc();
  if (!abc.contains(theta.to_array())) throw UsageError("synthetic theta outside the ABC bounds");
  for (const auto& c : theta_schedule) {
    if (!abc.contains(c.theta.to_array())) throw UsageError("scheduled theta outside the ABC bounds");
  }
  for (const auto& c : lambda_schedule) {
    if (!(c.lambda_hz > 0.0)) throw UsageError("scheduled atrial rate must be positive");
  }
  if (jitter_fraction < 0.0 || (jitter_fraction > 0.0 && !(jitter_period_hours > 0.0))) {
    throw UsageError("invalid jitter settings");
  }
  if (invalid_beat_fraction < 0.0 || invalid_beat_fraction >= 1.0 || afr_missing_fraction < 0.0 ||
      afr_missing_fraction >= 1.0 || afr_noise_hz < 0.0) {
    throw UsageError("invalid noise settings");
  }
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.patient_id = j.value("patient", s.patient_id);
  s.duration_hours = j.value("duration_hours", s.duration_hours);
  if (j.contains("start_time")) s.start_clock_s = parse_clock(j.at("start_time").get<std::string>());
  if (j.contains("coupling")) {
    s.coupling.rp_ms = j["coupling"].value("rp_ms", s.coupling.rp_ms);
    s.coupling.cd_ms = j["coupling"].value("cd_ms", s.coupling.cd_ms);
  }
  if (!j.contains("theta")) throw UsageError("synthetic spec needs 'theta'");
  s.theta = theta_from_json(j.at("theta"));
  for (const auto& c : j.value("theta_schedule", nlohmann::json::array())) {
    s.theta_schedule.push_back({c.at("start_hour").get<double>(), theta_from_json(c.at("theta"))});
  }
  s.lambda_hz = j.value("lambda_hz", s.lambda_hz);
  for (const auto& c : j.value("lambda_schedule", nlohmann::json::array())) {
    s.lambda_schedule.push_back({c.at("start_hour").get<double>(), c.at("lambda_hz").get<double>()});
  }
  if (j.contains("jitter")) {
    s.jitter_fraction = j["jitter"].value("fraction", 0.0);
    s.jitter_period_hours = j["jitter"].value("period_hours", 1.0);
  }
  if (j.contains("noise")) {
    s.invalid_beat_fraction = j["noise"].value("invalid_beat_fraction", 0.0);
    s.afr_missing_fraction = j["noise"].value("afr_missing_fraction", 0.0);
    s.afr_noise_hz = j["noise"].value("afr_noise_hz", 0.0);
  }
  return s;
}

nlohmann::json SyntheticSpec::to_json() const {
  nlohmann::ordered_json j;
  j["patient"] = patient_id;
  j["duration_hours"] = duration_hours;
  j["start_time"] = format_clock(start_clock_s);
  j["coupling"] = {{"rp_ms", coupling.rp_ms}, {"cd_ms", coupling.cd_ms}};
  j["theta"] = theta_to_json(theta);
  auto ts = nlohmann::ordered_json::array();
  for (const auto& c : theta_schedule) ts.push_back({{"start_hour", c.start_hour}, {"theta", theta_to_json(c.theta)}});
  j["theta_schedule"] = ts;
  j["lambda_hz"] = lambda_hz;
  auto ls = nlohmann::ordered_json::array();
  for (const auto& c : lambda_schedule) ls.push_back({{"start_hour", c.start_hour}, {"lambda_hz", c.lambda_hz}});
  j["lambda_schedule"] = ls;
  j["jitter"] = {{"fraction", jitter_fraction}, {"period_hours", jitter_period_hours}};
  j["noise"] = {{"invalid_beat_fraction", invalid_beat_fraction},
                {"afr_missing_fraction", afr_missing_fraction},
                {"afr_noise_hz", afr_noise_hz}};
  return j;
}

SyntheticRecording synthesize(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const double total_ms = spec.duration_hours * kHourMs;
  const std::uint64_t patient_key = fnv1a64(spec.patient_id);

  std::set<double> cuts = {0.0, total_ms};
  for (const auto& c : spec.theta_schedule) cuts.insert(std::clamp(c.start_hour * kHourMs, 0.0, total_ms));
  for (const auto& c : spec.lambda_schedule) cuts.insert(std::clamp(c.start_hour * kHourMs, 0.0, total_ms));
  if (spec.jitter_fraction > 0.0) {
    const double period = spec.jitter_period_hours * kHourMs;
    for (double t = period; t < total_ms; t += period) cuts.insert(t);
  }

  auto theta_at = [&](double t) {
    ModelParameters th = spec.theta;
    double best = -1.0;
    for (const auto& c : spec.theta_schedule) {
      const double s = c.start_hour * kHourMs;
      if (s <= t && s >= best) {
        best = s;
        th = c.theta;
      }
    }
    return th;
  };
  auto lambda_at = [&](double t) {
    double lam = spec.lambda_hz;
    double best = -1.0;
    for (const auto& c : spec.lambda_schedule) {
      const double s = c.start_hour * kHourMs;
      if (s <= t && s >= best) {
        best = s;
        lam = c.lambda_hz;
      }
    }
    return lam;
  };

  SyntheticRecording rec;
  rec.beats.patient_id = spec.patient_id;
  rec.beats.start_clock_s = spec.start_clock_s;
  const auto ga = ParameterBounds::ga();
  const auto abc = ParameterBounds::abc();

  std::vector<double> bounds(cuts.begin(), cuts.end());
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    SyntheticPiece piece;
    piece.start_ms = bounds[k];
    piece.end_ms = bounds[k + 1];
    piece.theta = theta_at(piece.start_ms);
    piece.lambda_hz = lambda_at(piece.start_ms);
    if (spec.jitter_fraction > 0.0) {
      const auto period = static_cast<std::uint64_t>(piece.start_ms / (spec.jitter_period_hours * kHourMs));
      std::mt19937_64 rng(derive_seed(seed, patient_key, period, Purpose::kSynth, 1));
      std::uniform_real_distribution<double> u(-spec.jitter_fraction, spec.jitter_fraction);
      auto v = piece.theta.to_array();
      for (std::size_t i = 0; i < kNumParams; ++i) v[i] += u(rng) * ga.range(i);
      abc.clamp(v);
      piece.theta = ModelParameters::from_array(v);
    }

    SimulationOptions opts;
    opts.duration_ms = piece.end_ms - piece.start_ms;
    opts.warmup_intervals = 0;
    const auto sim = simulate(piece.theta, spec.coupling, piece.lambda_hz,
                              derive_seed(seed, patient_key, k, Purpose::kSynth, 0), opts);
    auto& times = rec.beats.beat_times;
    for (double t : sim.ventricular_times) {
      if (t >= opts.duration_ms) break;
      const double abs_t = piece.start_ms + t;
      if (!times.empty() && abs_t < times.back() + spec.coupling.rp_ms) continue;
      times.push_back(abs_t);
    }
    rec.pieces.push_back(piece);
  }

  std::mt19937_64 noise(derive_seed(seed, patient_key, 0, Purpose::kSynth, 2));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto& beat_ok = rec.beat_valid;
  beat_ok.assign(rec.beats.beat_times.size(), true);
  if (spec.invalid_beat_fraction > 0.0) {
    for (std::size_t i = 0; i < beat_ok.size(); ++i) beat_ok[i] = u01(noise) >= spec.invalid_beat_fraction;
  }
  for (std::size_t i = 0; i + 1 < beat_ok.size(); ++i) rec.beats.valid_flags.push_back(beat_ok[i] && beat_ok[i + 1]);

  std::normal_distribution<double> jitter(0.0, 1.0);
  const auto minutes = static_cast<int>(std::ceil(total_ms / kMinuteMs));
  for (int m = 0; m < minutes; ++m) {
    const double lam = lambda_at(m * kMinuteMs);
    const bool missing = spec.afr_missing_fraction > 0.0 && u01(noise) < spec.afr_missing_fraction;
    double value = lam;
    if (spec.afr_noise_hz > 0.0) value = std::max(0.5, lam + spec.afr_noise_hz * jitter(noise));
    if (missing) continue;
    rec.afr.minutes.push_back(m);
    rec.afr.afr_hz.push_back(value);
  }
  return rec;
}

SyntheticFiles write_synthetic(const SyntheticSpec& spec, const SyntheticRecording& rec, std::uint64_t seed,
                               const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  SyntheticFiles files{out_dir / (spec.patient_id + "_rr.csv"), out_dir / (spec.patient_id + "_afr.csv"),
                       out_dir / (spec.patient_id + "_truth.json")};
  {
    std::ofstream os(files.rr);
    os << "# start_time=" << format_clock(rec.beats.start_clock_s) << '\n' << "t_ms,valid\n";
    const auto& t = rec.beats.beat_times;
    for (std::size_t i = 0; i < t.size(); ++i) os << format_number(t[i]) << ',' << (rec.beat_valid[i] ? 1 : 0) << '\n';
  }
  {
    std::ofstream os(files.afr);
    os << "minute,afr_hz\n";
    std::size_t k = 0;
    const auto minutes = static_cast<int>(std::ceil(spec.duration_hours * 60.0));
    for (int m = 0; m < minutes; ++m) {
      os << m << ',';
      if (k < rec.afr.minutes.size() && rec.afr.minutes[k] == m) os << format_number(rec.afr.afr_hz[k++]);
      os << '\n';
    }
  }
  {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["spec"] = spec.to_json();
    auto pieces = nlohmann::ordered_json::array();
    for (const auto& p : rec.pieces) {
      pieces.push_back({{"start_ms", p.start_ms},
                        {"end_ms", p.end_ms},
                        {"lambda_hz", p.lambda_hz},
                        {"theta", theta_to_json(p.theta)}});
    }
    j["pieces"] = pieces;
    std::ofstream os(files.truth);
    os << j.dump(2) << '\n';
  }
  return files;
}

}  // namespace avnode
