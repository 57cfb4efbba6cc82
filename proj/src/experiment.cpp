#include "uwauth/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "uwauth/errors.hpp"
#include "uwauth/plot.hpp"
#include "uwauth/util.hpp"

namespace uwauth::experiment {

namespace fs = std::filesystem;
using schemes::Scheme;

std::string format_diagnostic(const Diagnostic& d, const std::string& source) {
  std::string out = source;
  if (d.line > 0) out += ":" + std::to_string(d.line);
  out += d.severity == Diagnostic::Severity::Error ? ": error: " : ": warning: ";
  if (!d.field.empty()) out += d.field + ": ";
  return out + d.message;
}

bool ParsedConfig::has_errors() const {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Error; });
}

namespace {

std::vector<std::string> list_items(std::string_view value) {
  std::vector<std::string> out;
  for (auto item : split(value, ',')) {
    const auto t = trim(item);
    if (t.empty()) throw FormatError("empty list entry");
    out.emplace_back(t);
  }
  return out;
}

std::size_t non_negative(std::string_view text) {
  const auto v = parse_integer(text);
  if (v < 0) throw FormatError("expected a non-negative integer, got '" + std::string(trim(text)) + "'");
  return static_cast<std::size_t>(v);
}

bool parse_bool(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw FormatError("expected true or false, got '" + std::string(trim(text)) + "'");
}

void apply_key(ExperimentConfig& c, const std::string& key, std::string_view value) {
  if (key == "sensors") {
    c.sensors = non_negative(value);
  } else if (key == "features") {
    c.features = non_negative(value);
  } else if (key == "alphas") {
    c.alphas.clear();
    for (const auto& v : list_items(value)) c.alphas.push_back(parse_double(v));
  } else if (key == "ms") {
    c.ms.clear();
    for (const auto& v : list_items(value)) c.ms.push_back(non_negative(v));
  } else if (key == "schemes") {
    c.schemes.clear();
    for (const auto& v : list_items(value)) {
      try {
        c.schemes.push_back(schemes::parse_scheme(v));
      } catch (const ConfigError& e) {
        throw FormatError(e.what());
      }
    }
  } else if (key == "global") {
    c.global_notations = list_items(value);
  } else if (key == "samples_per_class") {
    c.samples_per_class = non_negative(value);
  } else if (key == "split") {
    const auto parts = list_items(value);
    if (parts.size() != 3) throw FormatError("expected three fractions: train, val, test");
    c.split = {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])};
  } else if (key == "seeds") {
    c.seeds.clear();
    for (const auto& v : list_items(value)) c.seeds.push_back(non_negative(v));
  } else if (key == "scenario") {
    c.scenario = std::string(trim(value));
  } else if (key == "separability") {
    c.separability = parse_double(value);
  } else if (key == "ingest") {
    c.ingest_path = std::string(trim(value));
  } else if (key == "learning_rate") {
    c.train.learning_rate = parse_double(value);
  } else if (key == "epochs") {
    c.train.epochs = non_negative(value);
  } else if (key == "batch_size") {
    c.train.batch_size = non_negative(value);
  } else if (key == "optimizer") {
    c.train.optimizer = nn::parse_optimizer(value);
  } else if (key == "early_stop_patience") {
    c.train.early_stop_patience = non_negative(value);
  } else if (key == "output_dir") {
    c.output_dir = std::string(trim(value));
  } else if (key == "cldae_mode") {
    const auto m = to_lower(trim(value));
    if (m == "frozen")
      c.cldae_mode = schemes::CldaeMode::FrozenDecision;
    else if (m == "joint")
      c.cldae_mode = schemes::CldaeMode::Joint;
    else
      throw FormatError("expected frozen or joint");
  } else if (key == "neuron_budget") {
    if (to_lower(trim(value)) == "none")
      c.neuron_budget.reset();
    else
      c.neuron_budget = non_negative(value);
  } else if (key == "roc") {
    c.write_roc = parse_bool(value);
  } else if (key == "bundles") {
    c.write_bundles = parse_bool(value);
  } else {
    throw ConfigError("unknown key");
  }
}

}  // namespace

ParsedConfig parse_config(std::istream& is) {
  ParsedConfig parsed;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      parsed.diagnostics.push_back({Diagnostic::Severity::Error, line_no, "", "expected 'key = value'"});
      continue;
    }
    const auto key = to_lower(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) {
      parsed.diagnostics.push_back({Diagnostic::Severity::Error, line_no, "", "missing key before '='"});
      continue;
    }
    if (const auto it = parsed.key_lines.find(key); it != parsed.key_lines.end()) {
      parsed.diagnostics.push_back({Diagnostic::Severity::Error, line_no, key,
                                    "duplicate key (first set on line " + std::to_string(it->second) + ")"});
      continue;
    }
    parsed.key_lines[key] = line_no;
    if (value.empty()) {
      parsed.diagnostics.push_back({Diagnostic::Severity::Error, line_no, key, "missing value"});
      continue;
    }
    try {
      apply_key(parsed.config, key, value);
    } catch (const Error& e) {
      parsed.diagnostics.push_back({Diagnostic::Severity::Error, line_no, key, e.what()});
    }
  }
  return parsed;
}

ParsedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_config(in);
}

void validate_config(ParsedConfig& parsed) {
  const auto& c = parsed.config;
  auto line_of = [&](const std::string& key) {
    const auto it = parsed.key_lines.find(key);
    return it == parsed.key_lines.end() ? std::size_t{0} : it->second;
  };
  auto error = [&](const std::string& key, const std::string& msg) {
    parsed.diagnostics.push_back({Diagnostic::Severity::Error, line_of(key), key, msg});
  };
  auto warn = [&](const std::string& key, const std::string& msg) {
    parsed.diagnostics.push_back({Diagnostic::Severity::Warning, line_of(key), key, msg});
  };
  auto has = [&](Scheme s) { return std::find(c.schemes.begin(), c.schemes.end(), s) != c.schemes.end(); };

  if (c.sensors < 1) error("sensors", "must be at least 1");
  if (c.features < 1) error("features", "must be at least 1");
  if (c.alphas.empty()) error("alphas", "list is empty");
  for (double a : c.alphas)
    if (!(a >= 0.0 && a <= 1.0)) error("alphas", "value " + format_double(a) + " outside [0, 1]");
  if (c.schemes.empty()) error("schemes", "list is empty");
  for (std::size_t i = 0; i < c.schemes.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (c.schemes[i] == c.schemes[j])
        warn("schemes", std::string(schemes::to_string(c.schemes[i])) + " listed twice");
  if ((has(Scheme::AE) || has(Scheme::CLDAE)) && c.ms.empty()) error("ms", "list is empty");
  for (auto m : c.ms)
    if (m < 1) error("ms", "M must be at least 1");
  if (has(Scheme::CLDAE) && std::find(c.ms.begin(), c.ms.end(), 1) != c.ms.end())
    warn("ms", "CLDAE with M = 1 degenerates to LD (same networks and scores)");
  if (c.seeds.empty()) error("seeds", "list is empty");
  if (c.samples_per_class < 1) error("samples_per_class", "must be at least 1");
  try {
    c.split.validate();
  } catch (const ConfigError& e) {
    error("split", e.what());
  }

  if (c.ingest_path.empty()) {
    try {
      datagen::reference_scenario(c.scenario);
    } catch (const ConfigError& e) {
      error("scenario", e.what());
    }
  } else if (!std::ifstream(c.ingest_path)) {
    error("ingest", "cannot read '" + c.ingest_path + "'");
  }
  if (c.separability && !(std::isfinite(*c.separability) && *c.separability >= 0.0))
    error("separability", "must be a finite non-negative number");

  if (!(c.train.learning_rate > 0.0 && std::isfinite(c.train.learning_rate)))
    error("learning_rate", "must be positive");
  if (c.train.epochs < 1) error("epochs", "must be at least 1");
  if (c.train.batch_size < 1) error("batch_size", "must be at least 1");
  const auto train_rows = 2 * static_cast<std::size_t>(std::llround(c.split.train * c.samples_per_class));
  if (c.train.batch_size > train_rows && c.samples_per_class >= 1)
    error("batch_size", std::to_string(c.train.batch_size) + " exceeds the " + std::to_string(train_rows) +
                            " training rows");
  const auto val_rows = static_cast<std::size_t>(std::llround(c.split.val * c.samples_per_class));
  if (c.samples_per_class >= 1 && val_rows < 1)
    error("samples_per_class", "too few samples for a non-empty validation split");

  if (has(Scheme::Global)) {
    if (c.global_notations.empty()) error("global", "GLOBAL scheme needs at least one notation");
    std::map<std::size_t, std::string> by_m;
    for (const auto& n : c.global_notations) {
      try {
        const auto gc = schemes::parse_global_config(n, std::max<std::size_t>(c.sensors, 1), c.neuron_budget);
        if (const auto it = by_m.find(gc.m()); it != by_m.end())
          error("global", "'" + n + "' and '" + it->second + "' both have M = " + std::to_string(gc.m()));
        else
          by_m[gc.m()] = n;
      } catch (const ConfigError& e) {
        error("global", e.what());
      }
    }
  }
  if (c.output_dir.empty()) error("output_dir", "must not be empty");
}

std::vector<Cell> enumerate_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (auto s : cfg.schemes) {
    switch (s) {
      case Scheme::LD:
        cells.push_back({Scheme::LD, 1, ""});
        break;
      case Scheme::AE:
      case Scheme::CLDAE:
        for (auto m : cfg.ms) cells.push_back({s, m, ""});
        break;
      case Scheme::Global:
        for (const auto& n : cfg.global_notations)
          cells.push_back({s, schemes::parse_global_config(n, cfg.sensors, cfg.neuron_budget).m(), n});
        break;
    }
  }
  return cells;
}

std::string scheme_label(Scheme s) { return std::string(schemes::to_string(s)); }

std::uint64_t data_seed(std::uint64_t seed) { return derive_seed(seed, {hash_tag("dataset")}); }
std::uint64_t split_seed(std::uint64_t seed) { return derive_seed(seed, {hash_tag("split")}); }
std::uint64_t training_seed(std::uint64_t seed) { return derive_seed(seed, {hash_tag("training")}); }

datagen::MarginalBank marginal_bank(const ExperimentConfig& cfg) {
  if (!cfg.ingest_path.empty()) {
    auto bank = datagen::fit_marginal_bank(datagen::read_measured_series_file(cfg.ingest_path));
    if (bank.sensors() != cfg.sensors || bank.features() != cfg.features)
      throw ConfigError("measured series cover " + std::to_string(bank.sensors()) + " sensors x " +
                        std::to_string(bank.features()) + " features, config asks for " +
                        std::to_string(cfg.sensors) + " x " + std::to_string(cfg.features));
    return bank;
  }
  auto scenario = datagen::reference_scenario(cfg.scenario);
  if (cfg.separability) scenario.separability = *cfg.separability;
  return datagen::reference_marginals(scenario, cfg.sensors, cfg.features);
}

datagen::DatasetSplit make_dataset(const datagen::MarginalSampler& sampler, const ExperimentConfig& cfg,
                                   double alpha, std::uint64_t seed) {
  std::mt19937_64 rng(data_seed(seed));
  auto ds = datagen::generate_dataset(sampler, {alpha, cfg.sensors, cfg.features}, cfg.samples_per_class, rng);
  std::mt19937_64 split_rng(split_seed(seed));
  auto parts = datagen::split_dataset(ds, cfg.split, split_rng);
  parts.train.alpha = parts.val.alpha = parts.test.alpha = alpha;
  return parts;
}

namespace {

struct CellResult {
  Cell cell;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::optional<eval::EvalReport> report;
  std::optional<schemes::AuthenticatorBundle> bundle;
  std::string failure;
};

struct Job {
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

std::vector<CellResult> run_job(const ExperimentConfig& cfg, const datagen::MarginalSampler& sampler,
                                const std::vector<Cell>& cells, const Job& job) {
  const auto data = make_dataset(sampler, cfg, job.alpha, job.seed);
  auto train_cfg = cfg.train;
  train_cfg.seed = training_seed(job.seed);

  // LD encoders double as CLDAE stage 1; train them once per dataset.
  std::optional<std::vector<schemes::LocalEncoder>> ld;
  std::string ld_failure;
  auto ld_encoders = [&]() -> const std::vector<schemes::LocalEncoder>& {
    if (!ld && ld_failure.empty()) {
      try {
        ld = schemes::train_ld_encoders(data.train, data.val, train_cfg);
      } catch (const Error& e) {
        ld_failure = e.what();
      }
    }
    if (!ld) throw TrainingDivergedError("LD encoders: " + ld_failure, 0);
    return *ld;
  };

  std::vector<CellResult> out;
  for (const auto& cell : cells) {
    CellResult r{cell, job.alpha, job.seed, {}, {}, {}};
    try {
      schemes::AuthenticatorBundle bundle;
      if (cell.scheme == Scheme::Global) {
        bundle = schemes::train_global(schemes::parse_global_config(cell.notation, cfg.sensors, cfg.neuron_budget),
                                       data.train, data.val, train_cfg);
      } else {
        schemes::LocalSchemeOptions opts;
        opts.cldae_mode = cfg.cldae_mode;
        if (cell.scheme == Scheme::LD || cell.scheme == Scheme::CLDAE) opts.ld_encoders = &ld_encoders();
        bundle = schemes::train_local_scheme(cell.scheme, cell.m, data.train, data.val, train_cfg, opts);
      }
      const auto report = eval::evaluate(schemes::score_dataset(bundle, data.val),
                                         schemes::score_dataset(bundle, data.test),
                                         {scheme_label(cell.scheme), static_cast<int>(cell.m), job.alpha, job.seed},
                                         cfg.write_roc);
      bundle.lambda = report.lambda;
      bundle.alpha = job.alpha;
      bundle.seed = job.seed;
      r.report = report;
      if (cfg.write_bundles) r.bundle = std::move(bundle);
    } catch (const Error& e) {
      r.failure = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

bool report_less(const eval::EvalReport& a, const eval::EvalReport& b) {
  return std::tie(a.meta.scheme, a.meta.m, a.meta.alpha, a.meta.seed) <
         std::tie(b.meta.scheme, b.meta.m, b.meta.alpha, b.meta.seed);
}

std::string cell_stem(const std::string& scheme, std::size_t m, double alpha, std::uint64_t seed) {
  return scheme + "_M" + std::to_string(m) + "_a" + format_double(alpha) + "_s" + std::to_string(seed);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

// Seed-averaged epsilon per (scheme, M) against alpha.
std::vector<plot::Series> summary_series(const std::vector<eval::EvalReport>& reports) {
  std::map<std::pair<std::string, int>, std::map<double, std::pair<double, std::size_t>>> acc;
  for (const auto& r : reports) {
    auto& slot = acc[{r.meta.scheme, r.meta.m}][r.meta.alpha];
    slot.first += r.rates.epsilon;
    ++slot.second;
  }
  std::vector<plot::Series> out;
  for (const auto& [key, by_alpha] : acc) {
    plot::Series s;
    s.label = key.first + " (M=" + std::to_string(key.second) + ")";
    for (const auto& [alpha, sum] : by_alpha) {
      s.x.push_back(alpha);
      s.y.push_back(sum.first / static_cast<double>(sum.second));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void write_results_csv(std::ostream& os, const std::vector<eval::EvalReport>& reports) {
  os << eval::kReportCsvHeader << '\n';
  for (const auto& r : reports) os << eval::report_csv_row(r) << '\n';
}

std::vector<eval::EvalReport> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != eval::kReportCsvHeader)
    throw FormatError("results CSV must start with '" + std::string(eval::kReportCsvHeader) + "'");
  std::vector<eval::EvalReport> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 8) throw FormatError("results CSV line " + std::to_string(line_no) + ": expected 8 columns");
    eval::EvalReport r;
    r.meta.scheme = std::string(trim(cols[0]));
    r.meta.m = static_cast<int>(parse_integer(cols[1]));
    r.meta.alpha = parse_double(cols[2]);
    r.meta.seed = static_cast<std::uint64_t>(parse_integer(cols[3]));
    r.lambda = parse_double(cols[4]);
    r.rates = {parse_double(cols[5]), parse_double(cols[6]), parse_double(cols[7])};
    out.push_back(std::move(r));
  }
  return out;
}

RunSummary run_experiment(const ExperimentConfig& input, const RunOptions& options) {
  RunSummary summary;
  ExperimentConfig cfg = input;
  if (options.output_dir) cfg.output_dir = *options.output_dir;
  for (auto& s : cfg.seeds) s += options.seed_offset;

  ParsedConfig check{cfg, {}, {}};
  validate_config(check);
  if (check.has_errors()) {
    if (options.log)
      for (const auto& d : check.diagnostics) *options.log << format_diagnostic(d, "config") << '\n';
    summary.exit_code = kExitConfigError;
    return summary;
  }

  const auto cells = enumerate_cells(cfg);
  std::vector<Job> jobs;
  for (double a : cfg.alphas)
    for (auto s : cfg.seeds) jobs.push_back({a, s});

  const datagen::MarginalSampler sampler(marginal_bank(cfg));
  std::vector<std::vector<CellResult>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;
  const auto start = std::chrono::steady_clock::now();

  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      results[j] = run_job(cfg, sampler, cells, jobs[j]);
      const auto finished = ++done;
      if (options.log) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::lock_guard lock(log_mutex);
        *options.log << "[" << finished << "/" << jobs.size() << "] alpha=" << format_double(jobs[j].alpha)
                     << " seed=" << jobs[j].seed << " done, " << static_cast<long>(secs) << "s elapsed\n";
      }
    }
  };
  {
    const std::size_t threads = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }

  // Single writer from here on.
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  if (cfg.write_bundles) fs::create_directories(dir / "bundles");
  if (cfg.write_roc) fs::create_directories(dir / "roc");
  for (auto& job_results : results) {
    for (auto& r : job_results) {
      const auto label = scheme_label(r.cell.scheme);
      if (!r.report) {
        summary.failures.push_back({label, r.cell.m, r.alpha, r.seed, r.failure});
        continue;
      }
      const auto stem = cell_stem(label, r.cell.m, r.alpha, r.seed);
      if (r.bundle) {
        std::ostringstream os;
        schemes::write_bundle(os, *r.bundle);
        write_text(dir / "bundles" / (stem + ".bundle"), os.str());
      }
      if (cfg.write_roc) {
        std::ostringstream os;
        eval::write_roc_csv(os, r.report->roc);
        write_text(dir / "roc" / (stem + ".csv"), os.str());
        r.report->roc.clear();
      }
      summary.reports.push_back(std::move(*r.report));
    }
  }
  std::sort(summary.reports.begin(), summary.reports.end(), report_less);

  std::ostringstream csv;
  write_results_csv(csv, summary.reports);
  summary.results_path = (dir / "results.csv").string();
  write_text(summary.results_path, csv.str());

  std::ostringstream failures;
  failures << "scheme,M,alpha,seed,message\n";
  for (const auto& f : summary.failures)
    failures << f.scheme << ',' << f.m << ',' << format_double(f.alpha) << ',' << f.seed << ",\"" << f.message
             << "\"\n";
  write_text(dir / "failures.csv", failures.str());

  std::ostringstream svg;
  plot::write_log_plot_svg(svg, summary_series(summary.reports),
                           {"Error rate vs equicorrelation (seed average)", "alpha", "epsilon", 1e-6});
  summary.plot_path = (dir / "epsilon_vs_alpha.svg").string();
  write_text(summary.plot_path, svg.str());

  if (options.log)
    for (const auto& f : summary.failures)
      *options.log << "cell failed: " << f.scheme << " M=" << f.m << " alpha=" << format_double(f.alpha)
                   << " seed=" << f.seed << ": " << f.message << '\n';
  summary.exit_code = summary.failures.empty() ? kExitOk : kExitPartialFailure;
  return summary;
}

RunSummary run_experiment(const std::string& config_path, const RunOptions& options) {
  ParsedConfig parsed;
  try {
    parsed = load_config(config_path);
  } catch (const ConfigError& e) {
    if (options.log) *options.log << config_path << ": error: " << e.what() << '\n';
    RunSummary s;
    s.exit_code = kExitConfigError;
    return s;
  }
  validate_config(parsed);
  if (options.log)
    for (const auto& d : parsed.diagnostics) *options.log << format_diagnostic(d, config_path) << '\n';
  if (parsed.has_errors()) {
    RunSummary s;
    s.exit_code = kExitConfigError;
    return s;
  }
  return run_experiment(parsed.config, options);
}

}  // namespace uwauth::experiment
