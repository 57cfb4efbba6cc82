#pragma once

// Configuration-driven sweep runner: datasets per (alpha, seed), every
// scheme cell trained and evaluated, results written as CSV, bundles and an
// SVG summary plot.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uwauth/datagen.hpp"
#include "uwauth/eval.hpp"
#include "uwauth/nn.hpp"
#include "uwauth/schemes.hpp"

namespace uwauth::experiment {

struct ExperimentConfig {
  std::size_t sensors = 3;
  std::size_t features = 4;
  std::vector<double> alphas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::size_t> ms = {1, 2, 3};
  std::vector<schemes::Scheme> schemes = {schemes::Scheme::AE, schemes::Scheme::LD, schemes::Scheme::CLDAE,
                                          schemes::Scheme::Global};
  std::vector<std::string> global_notations = {"4-3-2-1||-3-1", "4-3-2-||-3-3-1", "4-3-||-6-3-3-1",
                                               "4-||-9-6-3-3-1"};
  std::size_t samples_per_class = 100000;
  datagen::SplitSpec split;
  std::vector<std::uint64_t> seeds = {1};
  std::string scenario = "default";
  std::optional<double> separability;  // overrides the scenario's value
  std::string ingest_path;             // measured series; replaces the scenario when set
  nn::TrainConfig train;
  std::string output_dir = "results";
  schemes::CldaeMode cldae_mode = schemes::CldaeMode::FrozenDecision;
  std::optional<std::size_t> neuron_budget = schemes::kDefaultNeuronBudget;
  bool write_roc = false;
  bool write_bundles = true;
};

struct Diagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::size_t line = 0;  // 0 when the problem is not tied to a line
  std::string field;
  std::string message;
};

std::string format_diagnostic(const Diagnostic& d, const std::string& source);

struct ParsedConfig {
  ExperimentConfig config;
  std::vector<Diagnostic> diagnostics;
  std::map<std::string, std::size_t> key_lines;

  bool has_errors() const;
};

// "key = value" lines; '#' starts a comment; list values are comma
// separated. Unknown keys and malformed values become diagnostics.
ParsedConfig parse_config(std::istream& is);
// Throws ConfigError when the file cannot be read.
ParsedConfig load_config(const std::string& path);

// Range and consistency checks, appended to parsed.diagnostics.
void validate_config(ParsedConfig& parsed);

// One trained (scheme, M) combination at a given alpha and seed.
struct Cell {
  schemes::Scheme scheme = schemes::Scheme::LD;
  std::size_t m = 1;
  std::string notation;  // global cells
};

// AE and CLDAE for every M, LD once (M = 1), one global cell per notation.
std::vector<Cell> enumerate_cells(const ExperimentConfig& cfg);

std::string scheme_label(schemes::Scheme s);

struct CellFailure {
  std::string scheme;
  std::size_t m = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::string message;
};

struct RunOptions {
  std::optional<std::string> output_dir;  // overrides the config
  std::size_t jobs = 1;
  std::uint64_t seed_offset = 0;
  std::ostream* log = nullptr;
};

struct RunSummary {
  int exit_code = 0;  // 0 ok, 1 config error, 2 some cells failed
  std::vector<eval::EvalReport> reports;  // sorted by (scheme, M, alpha, seed)
  std::vector<CellFailure> failures;
  std::string results_path;
  std::string plot_path;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitPartialFailure = 2;

// Deterministic seeds derived from a configured seed.
std::uint64_t data_seed(std::uint64_t seed);
std::uint64_t split_seed(std::uint64_t seed);
std::uint64_t training_seed(std::uint64_t seed);

// The marginals the config asks for (scenario or measured series).
datagen::MarginalBank marginal_bank(const ExperimentConfig& cfg);

// Dataset for one (alpha, seed); equal inputs give bitwise-equal splits.
datagen::DatasetSplit make_dataset(const datagen::MarginalSampler& sampler, const ExperimentConfig& cfg,
                                   double alpha, std::uint64_t seed);

RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});
// Loads, validates and runs; diagnostics go to options.log.
RunSummary run_experiment(const std::string& config_path, const RunOptions& options = {});

// Results CSV with the header, rows in the given order.
void write_results_csv(std::ostream& os, const std::vector<eval::EvalReport>& reports);
std::vector<eval::EvalReport> read_results_csv(std::istream& is);

}  // namespace uwauth::experiment
