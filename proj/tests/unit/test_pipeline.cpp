#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "avnode/error.hpp"
#include "avnode/pipeline.hpp"
#include "avnode/synth.hpp"

using namespace avnode;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("AVNODE_TEST_TMP");
  const fs::path root = env && *env ? fs::path(env) : fs::temp_directory_path() / "avnode_unit";
  const auto dir = root / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Thirteen hours of a constant-parameter patient plus a small, fast config.
PipelineConfig tiny_run(const fs::path& dir) {
  SyntheticSpec spec;
  spec.patient_id = "P1";
  spec.duration_hours = 13.0;
  spec.theta.fp = {450, 400, 150, 8, 20, 150};
  spec.theta.sp = {250, 300, 150, 15, 50, 150};
  const auto files = write_synthetic(spec, synthesize(spec, 21), 21, dir);

  PipelineConfig c;
  c.patients.push_back({"P1", files.rr, files.afr});
  c.output_dir = dir / "out";
  c.threads = 1;
  c.max_segments = 3;
  c.ga.population_size = 30;
  c.ga.ranked_count = 10;
  c.ga.immigration_count = 3;
  c.ga.generations_first = 1;
  c.ga.generations_min = 0;
  c.ga.generations_max = 1;
  c.ga.simulation_ms = 120'000.0;
  c.abc.n_particles = 10;
  c.abc.n_centers = 5;
  c.abc.n_iterations = 2;
  c.abc.threshold_ranks = {10, 8};
  c.abc.simulation_ms = 120'000.0;
  c.reduction.simulation_ms = 60'000.0;
  c.ks_cap = 200;
  return c;
}

}  // namespace

TEST_CASE("missing inputs fail before any compute") {
  const auto dir = scratch("missing");
  PipelineConfig c;
  c.output_dir = dir / "out";
  c.patients.push_back({"X", dir / "nope_rr.csv", dir / "nope_afr.csv"});
  std::ostringstream log;
  CHECK_THROWS_AS(run_estimate(c, log), DataError);
  CHECK_FALSE(fs::exists(c.output_dir / "X"));

  std::ofstream(dir / "rr.csv") << "t_ms\n0\n500\n";
  c.patients[0].rr = dir / "rr.csv";
  try {
    run_estimate(c, log);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("AFR") != std::string::npos);
  }
}

TEST_CASE("outcome tables") {
  std::istringstream ok("patient,recurrence,lvef\nP1,1,55\nP2,,NA\n");
  const auto t = parse_outcomes(ok);
  REQUIRE(t.names == std::vector<std::string>{"recurrence", "lvef"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].second[1] == 55.0);
  CHECK(std::isnan(t.rows[1].second[0]));
  CHECK(std::isnan(t.rows[1].second[1]));

  std::istringstream empty("");
  CHECK(parse_outcomes(empty).rows.empty());

  std::istringstream bad("patient,a\nP1,1,2\n");
  try {
    parse_outcomes(bad);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream header("id,a\n");
  CHECK_THROWS_AS(parse_outcomes(header), DataError);
}

TEST_CASE("config hash ignores paths and worker count") {
  PipelineConfig a;
  PipelineConfig b;
  b.output_dir = "/elsewhere";
  b.threads = 7;
  b.patients.push_back({"P", "a.csv", "b.csv"});
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.root_seed = 2;
  CHECK(a.hash() != b.hash());

  const auto back = PipelineConfig::from_json(a.to_json());
  CHECK(back.hash() == a.hash());
}

TEST_CASE("config parsing") {
  const auto dir = scratch("config");
  const nlohmann::json j = {{"patients", {{{"id", "A"}, {"rr", "a_rr.csv"}, {"afr", "a_afr.csv"}}}},
                            {"output_dir", "out"},
                            {"abc", {{"n_particles", 50}, {"n_centers", 5}}},
                            {"ga", {{"bounds", {{"lo", std::vector<double>(12, 1.0)}}}}}};
  std::ofstream(dir / "cfg.json") << j.dump();
  const auto c = PipelineConfig::load(dir / "cfg.json");
  CHECK(c.patients.at(0).rr == dir / "a_rr.csv");
  CHECK(c.output_dir == dir / "out");
  CHECK(c.abc.n_particles == 50);
  CHECK(c.ga.bounds.lo[0] == 1.0);

  CHECK_THROWS_AS(PipelineConfig::from_json({{"abc", {{"n_particles", 7}}}}), UsageError);

  setenv("AVNODE_OUTPUT_DIR", "/tmp/override", 1);
  auto d = c;
  apply_env_overrides(d);
  CHECK(d.output_dir == "/tmp/override");
  unsetenv("AVNODE_OUTPUT_DIR");
}

TEST_CASE("end-to-end run on a small synthetic patient") {
  const auto dir = scratch("e2e");
  auto config = tiny_run(dir);
  std::ostringstream log;
  const auto summary = run_estimate(config, log);
  CHECK(summary.patients_accepted == 1);
  CHECK(summary.segments_estimated == 3);
  CHECK(summary.segments_failed == 0);

  const auto pdir = config.output_dir / "P1";
  const auto props = slurp(pdir / "properties.jsonl");
  CHECK(std::count(props.begin(), props.end(), '\n') == 3);
  CHECK(fs::exists(pdir / "samples" / "s0002.csv"));
  CHECK(slurp(pdir / "samples" / "s0000.csv").rfind("# config_hash=" + config.hash(), 0) == 0);
  const auto run = nlohmann::json::parse(slurp(config.output_dir / "run.json"));
  CHECK(run.at("config_hash") == config.hash());

  const auto trend = load_trend(pdir, "P1");
  REQUIRE(trend.points.size() == 3);
  CHECK(trend.points[1].start_ms == 300e3);
  CHECK(trend.points[0].clock_s == 8 * 3600.0);
  CHECK_FALSE(trend.points[0].samples[0].empty());

  SUBCASE("rerun in a fresh directory reproduces every file") {
    auto again = config;
    again.output_dir = dir / "out2";
    run_estimate(again, log);
    for (const char* f : {"ga.jsonl", "posterior.jsonl", "properties.jsonl", "samples/s0001.csv"}) {
      CHECK_MESSAGE(slurp(pdir / f) == slurp(again.output_dir / "P1" / f), f);
    }
  }

  SUBCASE("resume only recomputes missing segments") {
    const auto before = slurp(pdir / "properties" / "s0001.json");
    fs::remove(pdir / "properties" / "s0001.json");
    const auto second = run_estimate(config, log);
    CHECK(second.segments_skipped == 2);
    CHECK(second.segments_estimated == 1);
    CHECK(slurp(pdir / "properties" / "s0001.json") == before);
  }

  SUBCASE("a corrupt segment is isolated") {
    fs::remove(pdir / "posterior" / "s0001.json");
    fs::remove(pdir / "properties" / "s0001.json");
    std::ofstream(pdir / "ga" / "s0001.json") << "{\"status\":\"ok\",\"ranked\":[{\"theta\":[1,2]}]}";
    const auto second = run_estimate(config, log);
    CHECK(second.segments_failed == 1);
    CHECK(second.segments_skipped == 2);
    const auto rec = nlohmann::json::parse(slurp(pdir / "properties" / "s0001.json"));
    CHECK(rec.at("status") == "unestimated");
    CHECK(load_trend(pdir, "P1").points.size() == 2);
  }

  SUBCASE("reduce and trends run from the stored posterior") {
    const auto before = slurp(pdir / "properties.jsonl");
    run_reduce(config, log);
    const auto trend2 = load_trend(pdir, "P1");
    REQUIRE(trend2.points.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(trend2.points[i].summary.phi_max == trend.points[i].summary.phi_max);

    run_trends(config, log);
    CHECK(fs::exists(config.output_dir / "patient_metrics.csv"));
    CHECK(fs::exists(config.output_dir / "cohort_summary.csv"));
    CHECK(log.str().find("outcomes") != std::string::npos);

    std::ofstream(dir / "outcomes.csv") << "patient,recurrence\nP1,1\n";
    config.outcomes = dir / "outcomes.csv";
    run_trends(config, log);
    CHECK(fs::exists(config.output_dir / "correlations.csv"));

    std::ostringstream report;
    run_report(config, report);
    CHECK(report.str().find("P1") != std::string::npos);
  }
}

TEST_CASE("segment_indices restricts estimation to the listed windows") {
  const auto dir = scratch("indices");
  auto config = tiny_run(dir);
  config.max_segments = 0;
  config.segment_indices = {7, 5};
  CHECK(config.hash() != tiny_run(dir).hash());
  CHECK(PipelineConfig::from_json(config.to_json()).segment_indices == config.segment_indices);

  std::ostringstream log;
  const auto summary = run_estimate(config, log);
  CHECK(summary.segments_estimated == 2);
  const auto pdir = config.output_dir / "P1";
  CHECK(fs::exists(pdir / "properties" / "s0005.json"));
  CHECK(fs::exists(pdir / "properties" / "s0007.json"));
  CHECK_FALSE(fs::exists(pdir / "properties" / "s0000.json"));
  const auto trend = load_trend(pdir, "P1");
  REQUIRE(trend.points.size() == 2);
  CHECK(trend.points[0].start_ms == 5 * 300e3);
}

TEST_CASE("trends without estimated segments is a data error") {
  const auto dir = scratch("no_trend");
  PipelineConfig c;
  c.output_dir = dir / "out";
  c.patients.push_back({"Z", dir / "z_rr.csv", dir / "z_afr.csv"});
  std::ostringstream log;
  CHECK_THROWS_AS(run_trends(c, log), DataError);
}
