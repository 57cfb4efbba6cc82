// Sweep runner: `uwauth_cli run <config>` and `uwauth_cli validate <config>`.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "uwauth/errors.hpp"
#include "uwauth/experiment.hpp"

namespace ex = uwauth::experiment;

namespace {

int validate(const std::string& path) {
  ex::ParsedConfig parsed;
  try {
    parsed = ex::load_config(path);
  } catch (const uwauth::ConfigError& e) {
    std::cerr << path << ": error: " << e.what() << '\n';
    return ex::kExitConfigError;
  }
  ex::validate_config(parsed);
  for (const auto& d : parsed.diagnostics) std::cerr << ex::format_diagnostic(d, path) << '\n';
  if (parsed.has_errors()) return ex::kExitConfigError;
  std::cout << path << ": ok (" << ex::enumerate_cells(parsed.config).size() << " cells x "
            << parsed.config.alphas.size() << " alphas x " << parsed.config.seeds.size() << " seeds)\n";
  return ex::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physical-layer authentication sweep runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::size_t jobs = 1;
  std::uint64_t seed_offset = 0;

  auto* run = app.add_subcommand("run", "Train and evaluate every configured cell");
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--jobs", jobs, "Parallel (alpha, seed) jobs")->check(CLI::PositiveNumber);
  run->add_option("--seed-offset", seed_offset, "Added to every configured seed");

  auto* check = app.add_subcommand("validate", "Check a config without running it");
  check->add_option("config", config_path, "Experiment config file")->required();

  CLI11_PARSE(app, argc, argv);

  if (check->parsed()) return validate(config_path);

  ex::RunOptions opts;
  if (!out_dir.empty()) opts.output_dir = out_dir;
  opts.jobs = jobs;
  opts.seed_offset = seed_offset;
  opts.log = &std::cerr;
  try {
    const auto summary = ex::run_experiment(config_path, opts);
    if (summary.exit_code != ex::kExitConfigError)
      std::cout << summary.reports.size() << " results written to " << summary.results_path << ", plot "
                << summary.plot_path << ", " << summary.failures.size() << " failed cells\n";
    return summary.exit_code;
  } catch (const uwauth::ConfigError& e) {
    std::cerr << config_path << ": error: " << e.what() << '\n';
    return ex::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ex::kExitPartialFailure;
  }
}
