#include "avnode/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "avnode/error.hpp"

namespace avnode {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void fail(const std::string& what, std::size_t line) {
  throw DataError(what + " (line " + std::to_string(line) + ")");
}

std::ifstream open_or_throw(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  return in;
}

}  // namespace

double parse_clock(const std::string& text) {
  int h = 0, m = 0, s = 0;
  char c1 = 0, c2 = 0;
  std::istringstream is(text);
  is >> h >> c1 >> m;
  if (!is || c1 != ':') throw DataError("bad clock time '" + text + "', expected HH:MM[:SS]");
  if (is >> c2) {
    if (c2 != ':' || !(is >> s)) throw DataError("bad clock time '" + text + "'");
  }
  if (h < 0 || h > 23 || m < 0 || m > 59 || s < 0 || s > 59) throw DataError("clock time out of range '" + text + "'");
  return h * 3600.0 + m * 60.0 + s;
}

std::vector<double> BeatSeries::valid_intervals() const {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < beat_times.size(); ++i) {
    if (valid_flags[i]) out.push_back(beat_times[i + 1] - beat_times[i]);
  }
  return out;
}

double AfrTrend::nearest(int minute) const {
  if (minutes.empty()) throw DataError("AFR trend is empty");
  const auto it = std::lower_bound(minutes.begin(), minutes.end(), minute);
  if (it == minutes.end()) return afr_hz.back();
  const auto idx = static_cast<std::size_t>(it - minutes.begin());
  if (*it == minute || idx == 0) return afr_hz[idx];
  const int after = *it - minute;
  const int before = minute - minutes[idx - 1];
  return before <= after ? afr_hz[idx - 1] : afr_hz[idx];
}

BeatSeries parse_beats(std::istream& in, std::string patient_id) {
  BeatSeries out;
  out.patient_id = std::move(patient_id);
  std::vector<bool> beat_ok;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  bool has_valid = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto pos = t.find("start_time=");
      if (pos != std::string::npos) out.start_clock_s = parse_clock(trim(t.substr(pos + 11)));
      continue;
    }
    const auto fields = split_fields(t);
    if (!header_seen) {
      if (fields.empty() || fields[0] != "t_ms") fail("expected header 't_ms,valid'", line_no);
      has_valid = fields.size() > 1 && fields[1] == "valid";
      header_seen = true;
      continue;
    }
    double ts = 0.0;
    if (fields.empty() || !parse_double(fields[0], ts) || !std::isfinite(ts)) fail("malformed timestamp", line_no);
    bool ok = true;
    if (has_valid) {
      if (fields.size() < 2) fail("missing valid flag", line_no);
      const auto& v = fields[1];
      if (v == "1" || v == "true") {
        ok = true;
      } else if (v == "0" || v == "false") {
        ok = false;
      } else {
        fail("malformed valid flag '" + v + "'", line_no);
      }
    }
    if (!out.beat_times.empty() && ts <= out.beat_times.back()) {
      fail("beat timestamps not strictly increasing", line_no);
    }
    out.beat_times.push_back(ts);
    beat_ok.push_back(ok);
  }
  if (!header_seen) throw DataError("beat file is empty");
  if (out.beat_times.empty()) throw DataError("beat file has no beats");
  for (std::size_t i = 0; i + 1 < beat_ok.size(); ++i) out.valid_flags.push_back(beat_ok[i] && beat_ok[i + 1]);
  return out;
}

BeatSeries parse_beats(const std::filesystem::path& file, std::string patient_id) {
  auto in = open_or_throw(file);
  try {
    return parse_beats(in, std::move(patient_id));
  } catch (const DataError& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

AfrTrend parse_afr(std::istream& in) {
  AfrTrend out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  double scale = 1.0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split_fields(t);
    if (!header_seen) {
      if (fields.size() < 2 || fields[0] != "minute") fail("expected header 'minute,afr_hz' or 'minute,afr_per_min'", line_no);
      if (fields[1] == "afr_hz") {
        scale = 1.0;
      } else if (fields[1] == "afr_per_min") {
        scale = 1.0 / 60.0;
      } else {
        fail("unknown AFR unit column '" + fields[1] + "'", line_no);
      }
      header_seen = true;
      continue;
    }
    double minute = 0.0;
    if (fields.empty() || !parse_double(fields[0], minute) || minute != std::floor(minute) || minute < 0) {
      fail("malformed minute index", line_no);
    }
    const int m = static_cast<int>(minute);
    if (!out.minutes.empty() && m <= out.minutes.back()) fail("minute indices not strictly increasing", line_no);
    const std::string v = fields.size() > 1 ? fields[1] : std::string();
    if (v.empty() || v == "NA" || v == "nan" || v == "NaN") continue;
    double afr = 0.0;
    if (!parse_double(v, afr)) fail("malformed AFR value '" + v + "'", line_no);
    if (!(afr > 0.0) || !std::isfinite(afr)) fail("AFR must be positive", line_no);
    out.minutes.push_back(m);
    out.afr_hz.push_back(afr * scale);
  }
  if (!header_seen) throw DataError("AFR file is empty");
  return out;
}

AfrTrend parse_afr(const std::filesystem::path& file) {
  auto in = open_or_throw(file);
  try {
    return parse_afr(in);
  } catch (const DataError& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

std::vector<RRSegment> segment(const BeatSeries& beats) {
  std::vector<RRSegment> out;
  const auto& t = beats.beat_times;
  if (t.empty()) return out;

  const auto n_minutes = static_cast<std::size_t>(std::floor(t.back() / kMinuteMs)) + 1;
  std::vector<int> per_minute(n_minutes, 0);
  for (double ts : t) {
    if (ts >= 0.0) ++per_minute[static_cast<std::size_t>(ts / kMinuteMs)];
  }

  constexpr std::size_t kWindowMinutes = 10;
  constexpr std::size_t kStepMinutes = 5;
  int index = 0;
  for (std::size_t w = 0; w + kWindowMinutes <= n_minutes; w += kStepMinutes, ++index) {
    const bool sparse = std::any_of(per_minute.begin() + static_cast<std::ptrdiff_t>(w),
                                    per_minute.begin() + static_cast<std::ptrdiff_t>(w + kWindowMinutes),
                                    [](int c) { return c < kMinBeatsPerMinute; });
    if (sparse) continue;

    RRSegment seg;
    seg.patient_id = beats.patient_id;
    seg.index = index;
    seg.start_ms = static_cast<double>(w) * kMinuteMs;
    seg.lambda_hat = std::numeric_limits<double>::quiet_NaN();
    seg.wall_clock_start_s = std::fmod(beats.start_clock_s + seg.start_ms / 1000.0, 86400.0);
    const auto first = std::lower_bound(t.begin(), t.end(), seg.start_ms);
    const auto last = std::lower_bound(first, t.end(), seg.end_ms());
    seg.n_beats = static_cast<std::size_t>(last - first);
    for (auto it = first; it != last && it + 1 != last; ++it) {
      const auto i = static_cast<std::size_t>(it - t.begin());
      if (beats.valid_flags[i]) seg.rr_intervals.push_back(t[i + 1] - t[i]);
    }
    out.push_back(std::move(seg));
  }
  return out;
}

double covered_duration_ms(std::span<const RRSegment> segments) {
  std::vector<std::pair<double, double>> spans;
  spans.reserve(segments.size());
  for (const auto& s : segments) spans.emplace_back(s.start_ms, s.end_ms());
  std::sort(spans.begin(), spans.end());
  double total = 0.0;
  double cur_lo = 0.0, cur_hi = -1.0;
  for (const auto& [lo, hi] : spans) {
    if (lo > cur_hi) {
      if (cur_hi > cur_lo) total += cur_hi - cur_lo;
      cur_lo = lo;
      cur_hi = hi;
    } else {
      cur_hi = std::max(cur_hi, hi);
    }
  }
  if (cur_hi > cur_lo) total += cur_hi - cur_lo;
  return total;
}

bool check_patient_duration(std::span<const RRSegment> segments) {
  return covered_duration_ms(segments) >= kMinPatientCoverageMs;
}

std::vector<RRSegment> attach_afr(std::vector<RRSegment> segments, const AfrTrend& trend) {
  if (trend.empty()) throw DataError("AFR trend has no observed values");
  for (auto& seg : segments) {
    const int first_minute = static_cast<int>(seg.start_ms / kMinuteMs);
    double sum = 0.0;
    for (int m = first_minute; m < first_minute + 10; ++m) sum += trend.nearest(m);
    seg.lambda_hat = sum / 10.0;
  }
  return segments;
}

void write_segment_manifest(std::ostream& os, std::span<const RRSegment> segments) {
  for (const auto& s : segments) {
    nlohmann::ordered_json j;
    j["patient"] = s.patient_id;
    j["s"] = s.index;
    j["start"] = s.start_ms;
    j["n_beats"] = s.n_beats;
    j["lambda_hat"] = std::isfinite(s.lambda_hat) ? nlohmann::ordered_json(s.lambda_hat) : nlohmann::ordered_json();
    os << j.dump() << '\n';
  }
}

}  // namespace avnode
