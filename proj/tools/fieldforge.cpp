// fieldforge command-line tool: one JSON job per invocation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "fieldforge/study.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

int run(const std::string& subcommand, const std::string& config_path, const fieldforge::StudyOptions& opt) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot open config " << config_path << "\n";
    return kConfigError;
  }
  std::stringstream text;
  text << in.rdbuf();
  try {
    fieldforge::StudyOptions o = opt;
    o.base_dir = std::filesystem::path(config_path).parent_path();
    if (o.base_dir.empty()) o.base_dir = ".";
    o.expect_job = subcommand;
    const auto out = fieldforge::run_study(text.str(), o);
    fieldforge::write_study(out);
    for (const auto& [name, _] : out.files) std::cout << (std::filesystem::path(out.output_dir) / name).string() << "\n";
    return 0;
  } catch (const fieldforge::ConfigError& e) {
    std::cerr << config_path << ":" << e.what() << "\n";
    return kConfigError;
  } catch (const fieldforge::AmrFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    std::cerr << "rows completed before the failure: " << e.partial().rows.size() << "\n";
    fieldforge::write_trace_csv(e.partial(), std::cerr);
    return kNumericError;
  } catch (const fieldforge::NonConvergenceError& e) {
    std::cerr << "numeric failure: " << e.what() << " (best residual " << e.best_residual() << " after "
              << e.iterations() << " iterations)\n";
    return kNumericError;
  } catch (const fieldforge::StrongMixingError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const fieldforge::FitError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const fieldforge::Error& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fieldforge: 2D finite-element electrostatics, cavity modes and EPR quantization"};
  app.require_subcommand(1);
  std::string config;
  int workers = 0;
  std::string output;
  long long seed = -1;
  bool no_timing = false;

  for (const auto& job : fieldforge::study_jobs()) {
    auto* sub = app.add_subcommand(job, "run a '" + job + "' job");
    sub->add_option("--config", config, "JSON job file")->required()->check(CLI::ExistingFile);
    sub->add_option("--workers", workers, "worker threads (default: FIELDFORGE_WORKERS, else 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--output", output, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "eigensolver start-vector seed")->check(CLI::NonNegativeNumber);
    sub->add_flag("--no-timing", no_timing, "write zero wall times so outputs are byte-reproducible");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  fieldforge::StudyOptions opt;
  opt.workers = workers;
  if (seed >= 0) opt.seed = static_cast<std::uint64_t>(seed);
  if (no_timing) opt.timing = false;
  if (!output.empty()) opt.output_dir = output;
  return run(app.get_subcommands().front()->get_name(), config, opt);
}
