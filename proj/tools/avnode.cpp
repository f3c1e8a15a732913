// Command-line front end: synth, ingest, estimate, reduce, trends, report.
#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "avnode/error.hpp"
#include "avnode/pipeline.hpp"
#include "avnode/synth.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct StageOptions {
  std::string config;
  std::string output;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

void add_stage_options(CLI::App* cmd, StageOptions& o) {
  cmd->add_option("-c,--config", o.config, "pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--output", o.output, "output directory (overrides config and AVNODE_OUTPUT_DIR)");
  cmd->add_option("-j,--threads", o.threads, "worker threads (0 = all cores)");
  cmd->add_option("--seed", o.seed, "root seed");
}

avnode::PipelineConfig load_config(const StageOptions& o) {
  auto config = avnode::PipelineConfig::load(o.config);
  avnode::apply_env_overrides(config);
  if (!o.output.empty()) config.output_dir = o.output;
  if (o.threads) config.threads = *o.threads;
  if (o.seed) config.root_seed = *o.seed;
  return config;
}

int run_synth(const std::string& spec_path, std::uint64_t seed, const std::string& out_dir) {
  std::ifstream in(spec_path);
  if (!in) throw avnode::UsageError("cannot open " + spec_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw avnode::UsageError(spec_path + ": " + e.what());
  }
  const auto spec = avnode::SyntheticSpec::from_json(j);
  const auto rec = avnode::synthesize(spec, seed);
  const auto files = avnode::write_synthetic(spec, rec, seed, out_dir);
  std::cout << "wrote " << files.rr.string() << ", " << files.afr.string() << ", " << files.truth.string() << " ("
            << rec.beats.beat_times.size() << " beats)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AV-node refractory period and conduction delay estimation"};
  app.require_subcommand(1);

  std::string spec_path, synth_out = ".";
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "generate a synthetic RR/AFR recording with known parameters");
  synth->add_option("-s,--spec", spec_path, "synthetic patient spec (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("-o,--output", synth_out, "directory for the generated files");

  StageOptions ingest_o, estimate_o, reduce_o, trends_o, report_o;
  add_stage_options(app.add_subcommand("ingest", "segment recordings and write manifests"), ingest_o);
  add_stage_options(app.add_subcommand("estimate", "GA + ABC + reduction for every segment"), estimate_o);
  add_stage_options(app.add_subcommand("reduce", "recompute property records from posteriors"), reduce_o);
  add_stage_options(app.add_subcommand("trends", "patient metrics, cohort summary and correlations"), trends_o);
  add_stage_options(app.add_subcommand("report", "print a summary of existing outputs"), report_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return run_synth(spec_path, synth_seed, synth_out);
    if (app.got_subcommand("ingest")) {
      avnode::run_ingest(load_config(ingest_o), std::cout);
    } else if (app.got_subcommand("estimate")) {
      const auto s = avnode::run_estimate(load_config(estimate_o), std::cout);
      if (s.patients_accepted == 0) {
        std::cerr << "error: no patient met the 12-hour coverage requirement\n";
        return kData;
      }
    } else if (app.got_subcommand("reduce")) {
      avnode::run_reduce(load_config(reduce_o), std::cout);
    } else if (app.got_subcommand("trends")) {
      avnode::run_trends(load_config(trends_o), std::cout);
    } else if (app.got_subcommand("report")) {
      avnode::run_report(load_config(report_o), std::cout);
    }
    return kOk;
  } catch (const avnode::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const avnode::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
