#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "uwauth/errors.hpp"
#include "uwauth/experiment.hpp"
#include "uwauth/plot.hpp"

using namespace uwauth;
using namespace uwauth::experiment;
namespace fs = std::filesystem;

namespace {

ParsedConfig parse(const std::string& text) {
  std::istringstream in(text);
  auto p = parse_config(in);
  validate_config(p);
  return p;
}

bool mentions(const ParsedConfig& p, const std::string& field, Diagnostic::Severity sev, std::size_t line = 0) {
  for (const auto& d : p.diagnostics)
    if (d.field == field && d.severity == sev && (line == 0 || d.line == line)) return true;
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A configuration small enough to train in a few seconds.
ExperimentConfig tiny(const fs::path& dir) {
  ExperimentConfig c;
  c.alphas = {0.0, 0.8};
  c.ms = {2};
  c.schemes = {schemes::Scheme::LD, schemes::Scheme::CLDAE, schemes::Scheme::Global};
  c.global_notations = {"4-3-2-||-3-3-1"};
  c.samples_per_class = 400;
  c.train.epochs = 3;
  c.seeds = {4};
  c.output_dir = dir.string();
  return c;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("uwauth_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(ConfigParse, DefaultsAreValid) {
  const auto p = parse("");
  EXPECT_FALSE(p.has_errors());
  EXPECT_EQ(p.config.alphas.size(), 11u);
  EXPECT_EQ(p.config.seeds, (std::vector<std::uint64_t>{1}));
}

TEST(ConfigParse, ReadsEveryKey) {
  const auto p = parse(
      "# comment\n"
      "Sensors = 3\nfeatures=4\nalphas = 0, 0.5 # trailing\nms = 2,3\nschemes = ld, cldae, ae\n"
      "samples_per_class = 1000\nsplit = 0.5, 0.25, 0.25\nseeds = 1, 2\nscenario = null\n"
      "separability = 0.5\nlearning_rate = 0.01\nepochs = 10\nbatch_size = 32\noptimizer = gd\n"
      "early_stop_patience = 0\noutput_dir = out\ncldae_mode = joint\nneuron_budget = none\nroc = yes\n"
      "bundles = false\nglobal = 4-||-9-6-3-3-1\n");
  EXPECT_FALSE(p.has_errors());
  const auto& c = p.config;
  EXPECT_EQ(c.alphas, (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(c.ms, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(c.schemes.size(), 3u);
  EXPECT_EQ(c.split.train, 0.5);
  EXPECT_EQ(c.scenario, "null");
  EXPECT_EQ(*c.separability, 0.5);
  EXPECT_EQ(c.train.optimizer, nn::Optimizer::GradientDescent);
  EXPECT_EQ(c.train.early_stop_patience, 0u);
  EXPECT_EQ(c.cldae_mode, schemes::CldaeMode::Joint);
  EXPECT_FALSE(c.neuron_budget.has_value());
  EXPECT_TRUE(c.write_roc);
  EXPECT_FALSE(c.write_bundles);
  EXPECT_EQ(p.key_lines.at("sensors"), 2u);
}

TEST(ConfigParse, AlphaOutOfRangeIsAnError) {
  const auto p = parse("alphas = 0, 1.2\n");
  EXPECT_TRUE(p.has_errors());
  EXPECT_TRUE(mentions(p, "alphas", Diagnostic::Severity::Error, 1));
  EXPECT_EQ(format_diagnostic(p.diagnostics[0], "cfg.txt"), "cfg.txt:1: error: alphas: value 1.2 outside [0, 1]");
}

TEST(ConfigParse, CldaeWithUnitCodeWarns) {
  const auto p = parse("\nms = 1, 2\n");
  EXPECT_FALSE(p.has_errors());
  EXPECT_TRUE(mentions(p, "ms", Diagnostic::Severity::Warning, 2));
}

TEST(ConfigParse, MalformedGlobalNotation) {
  EXPECT_TRUE(mentions(parse("global = 4-3-2-1|-3-1\n"), "global", Diagnostic::Severity::Error, 1));
  // Off-budget notation.
  EXPECT_TRUE(mentions(parse("global = 4-3-3-1||-3-1\n"), "global", Diagnostic::Severity::Error, 1));
  // Accepted once the budget is lifted.
  EXPECT_FALSE(parse("global = 4-3-3-1||-3-1\nneuron_budget = none\n").has_errors());
  // Two notations with the same M.
  EXPECT_TRUE(
      mentions(parse("neuron_budget = none\nglobal = 4-2||-3-1, 3-2||-1\n"), "global", Diagnostic::Severity::Error));
  // Global budget does not matter when the scheme is not selected.
  EXPECT_FALSE(parse("schemes = ld\nglobal = 4-3-3-1||-3-1\n").has_errors());
}

TEST(ConfigParse, DuplicateAndUnknownKeys) {
  const auto p = parse("epochs = 3\nepochs = 4\nfrobnicate = 1\nnot a pair\nbatch_size = x\n");
  EXPECT_TRUE(mentions(p, "epochs", Diagnostic::Severity::Error, 2));
  EXPECT_TRUE(mentions(p, "frobnicate", Diagnostic::Severity::Error, 3));
  bool shape = false;
  for (const auto& d : p.diagnostics) shape |= d.line == 4;
  EXPECT_TRUE(shape);
  EXPECT_TRUE(mentions(p, "batch_size", Diagnostic::Severity::Error, 5));
  EXPECT_EQ(p.config.train.epochs, 3u);
}

TEST(ConfigParse, RangeChecks) {
  EXPECT_TRUE(mentions(parse("seeds = \n"), "seeds", Diagnostic::Severity::Error));
  EXPECT_TRUE(mentions(parse("split = 0.5, 0.5, 0.5\n"), "split", Diagnostic::Severity::Error));
  EXPECT_TRUE(mentions(parse("scenario = mars\n"), "scenario", Diagnostic::Severity::Error));
  EXPECT_TRUE(mentions(parse("learning_rate = 0\n"), "learning_rate", Diagnostic::Severity::Error));
  EXPECT_TRUE(mentions(parse("epochs = 0\n"), "epochs", Diagnostic::Severity::Error));
  EXPECT_TRUE(mentions(parse("samples_per_class = 10\nbatch_size = 64\n"), "batch_size",
                       Diagnostic::Severity::Error));
  EXPECT_TRUE(mentions(parse("ingest = /nonexistent/file.csv\n"), "ingest", Diagnostic::Severity::Error));
  EXPECT_TRUE(mentions(parse("schemes = ld, ld\n"), "schemes", Diagnostic::Severity::Warning));
  EXPECT_TRUE(mentions(parse("separability = -1\n"), "separability", Diagnostic::Severity::Error));
  EXPECT_THROW(load_config("/nonexistent/config.txt"), ConfigError);
}

TEST(Cells, DefaultEnumeration) {
  const auto cells = enumerate_cells(ExperimentConfig{});
  // AE x 3, LD once, CLDAE x 3, four global notations.
  ASSERT_EQ(cells.size(), 11u);
  std::size_t ld = 0, global = 0;
  for (const auto& c : cells) {
    ld += c.scheme == schemes::Scheme::LD;
    if (c.scheme == schemes::Scheme::Global) {
      ++global;
      EXPECT_EQ(c.m, global);
    }
  }
  EXPECT_EQ(ld, 1u);
  EXPECT_EQ(global, 4u);
}

TEST(ResultsCsv, RoundTrip) {
  eval::EvalReport a;
  a.meta = {"AE", 2, 0.3, 5};
  a.lambda = 0.123456789012345;
  a.rates = {0.1, 0.2, 0.15000000000000002};
  std::stringstream ss;
  write_results_csv(ss, {a, a});
  const auto back = read_results_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].meta.scheme, "AE");
  EXPECT_EQ(back[0].meta.m, 2);
  EXPECT_EQ(back[0].meta.alpha, 0.3);
  EXPECT_EQ(back[0].meta.seed, 5u);
  EXPECT_EQ(back[0].lambda, a.lambda);
  EXPECT_EQ(back[0].rates.epsilon, a.rates.epsilon);
  std::istringstream bad("scheme,M\n");
  EXPECT_THROW(read_results_csv(bad), FormatError);
}

TEST(Seeds, DerivedStreamsDiffer) {
  EXPECT_NE(data_seed(1), split_seed(1));
  EXPECT_NE(data_seed(1), training_seed(1));
  EXPECT_NE(data_seed(1), data_seed(2));
}

TEST(Datasets, SameInputsGiveSameSplit) {
  ExperimentConfig c;
  c.samples_per_class = 200;
  const datagen::MarginalSampler sampler(marginal_bank(c));
  const auto a = make_dataset(sampler, c, 0.5, 3);
  const auto b = make_dataset(sampler, c, 0.5, 3);
  EXPECT_TRUE(a.train == b.train);
  EXPECT_TRUE(a.test == b.test);
  EXPECT_EQ(a.train.size(), 240u);
  EXPECT_EQ(a.val.size(), 60u);
  EXPECT_EQ(a.test.size(), 100u);
  EXPECT_FALSE(make_dataset(sampler, c, 0.5, 4).train == a.train);
}

TEST(Run, WritesResultsBundlesAndPlot) {
  const auto dir = scratch("run");
  std::ostringstream log;
  const auto s = run_experiment(tiny(dir), {std::nullopt, 2, 0, &log});
  EXPECT_EQ(s.exit_code, kExitOk) << log.str();
  // LD, CLDAE M=2, one global cell; two alphas; one seed.
  EXPECT_EQ(s.reports.size(), 6u);
  EXPECT_TRUE(s.failures.empty());
  std::istringstream csv(slurp(s.results_path));
  const auto rows = read_results_csv(csv);
  EXPECT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows.front().meta.scheme, "CLDAE");
  EXPECT_TRUE(fs::exists(s.plot_path));
  EXPECT_NE(slurp(s.plot_path).find("<svg"), std::string::npos);
  std::size_t bundles = 0;
  for (const auto& e : fs::directory_iterator(dir / "bundles")) bundles += e.path().extension() == ".bundle";
  EXPECT_EQ(bundles, 6u);
  for (const auto& r : rows) {
    EXPECT_GE(r.rates.epsilon, 0.0);
    EXPECT_LE(r.rates.epsilon, 1.0);
  }
  fs::remove_all(dir);
}

TEST(Run, RepeatedRunsAreIdentical) {
  const auto d1 = scratch("rep1"), d2 = scratch("rep2");
  auto c = tiny(d1);
  c.write_bundles = false;
  const auto a = run_experiment(c, {std::nullopt, 1, 0, nullptr});
  const auto b = run_experiment(c, {d2.string(), 2, 0, nullptr});
  EXPECT_EQ(slurp(a.results_path), slurp(b.results_path));
  const auto shifted = run_experiment(c, {d2.string(), 1, 1, nullptr});
  EXPECT_EQ(shifted.reports.front().meta.seed, 5u);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Run, InvalidConfigReturnsOne) {
  auto c = tiny(scratch("bad"));
  c.alphas = {1.5};
  std::ostringstream log;
  EXPECT_EQ(run_experiment(c, {std::nullopt, 1, 0, &log}).exit_code, kExitConfigError);
  EXPECT_NE(log.str().find("alphas"), std::string::npos);
  EXPECT_EQ(run_experiment("/nonexistent/config.txt", {}).exit_code, kExitConfigError);
}

TEST(Plot, SvgContainsSeriesAndLogAxis) {
  std::ostringstream os;
  plot::write_log_plot_svg(os, {{"LD (M=1)", {0.0, 0.5, 1.0}, {0.1, 0.01, 0.0}}}, {"eps", "alpha", "epsilon", 1e-4});
  const auto svg = os.str();
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.find("<svg") != std::string::npos, true);
  EXPECT_NE(svg.find("LD (M=1)"), std::string::npos);
  EXPECT_NE(svg.find("polyline"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
