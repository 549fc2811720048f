#pragma once

// Command-line verbs: simulate, calibrate, analyze, report.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 runtime error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ratelab/config.hpp"
#include "ratelab/io.hpp"
#include "ratelab/rating_analytics.hpp"
#include "ratelab/report.hpp"
#include "ratelab/sim_loop.hpp"
#include "ratelab/stats_engine.hpp"

namespace ratelab::cli {

inline constexpr const char* version = "1.0.0";

namespace fs = std::filesystem;

/// Flags shared by simulate and calibrate; unset flags leave the file/default value.
struct SimOverrides {
  std::optional<std::size_t> users, items, latent_dim, iterations, mc_samples, window, epochs, dim;
  std::optional<double> noise_sigma, rating_frequency, ratio_init, learning_rate, l2;
  std::optional<std::string> threshold_mode;

  void bind(CLI::App& app) {
    app.add_option("--users", users, "number of simulated users");
    app.add_option("--items", items, "number of simulated items");
    app.add_option("--latent-dim", latent_dim, "environment factor dimension k");
    app.add_option("--noise-sigma", noise_sigma, "rating noise standard deviation");
    app.add_option("--iterations", iterations, "loop iterations");
    app.add_option("--rating-frequency", rating_frequency, "fraction of users rating per iteration");
    app.add_option("--ratio-init", ratio_init, "fraction of user x item pairs rated at initialization");
    app.add_option("--threshold-mode", threshold_mode, "quantile or raw")->check(CLI::IsMember({"quantile", "raw"}));
    app.add_option("--mc-samples", mc_samples, "Monte Carlo sample size for quantile cutoffs");
    app.add_option("--window", window, "smoothing window of the utility series");
    app.add_option("--lf-dim", dim, "latent factor recommender dimension");
    app.add_option("--lf-epochs", epochs, "SGD epochs per update");
    app.add_option("--lf-learning-rate", learning_rate, "SGD learning rate");
    app.add_option("--lf-l2", l2, "L2 penalty");
  }

  void apply(ProjectConfig& cfg) const {
    auto& s = cfg.sim;
    if (users) s.env.num_users = *users;
    if (items) s.env.num_items = *items;
    if (latent_dim) s.env.latent_dim = *latent_dim;
    if (noise_sigma) s.env.noise_sigma = *noise_sigma;
    if (iterations) s.n_iter = *iterations;
    if (rating_frequency) s.rating_frequency = *rating_frequency;
    if (ratio_init) s.ratio_init_ratings = *ratio_init;
    if (threshold_mode) s.thresholds.mode = parse_threshold_mode(*threshold_mode);
    if (mc_samples) s.mc_samples = *mc_samples;
    if (window) cfg.smoothing_window = *window;
    if (dim) s.latent_factor.dim = *dim;
    if (epochs) s.latent_factor.epochs = *epochs;
    if (learning_rate) s.latent_factor.learning_rate = *learning_rate;
    if (l2) s.latent_factor.l2_penalty = *l2;
  }
};

/// --seed values, else RATELAB_SEED, else 1; --num-seeds N expands the first
/// seed s into s, s+1, ..., s+N-1.
inline std::vector<std::uint64_t> resolve_seeds(const std::vector<std::uint64_t>& flags, std::size_t num_seeds) {
  std::vector<std::uint64_t> seeds = flags;
  if (seeds.empty()) {
    std::uint64_t s = 1;
    if (const char* env = std::getenv("RATELAB_SEED"); env && *env) {
      try {
        s = std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("RATELAB_SEED is not an unsigned integer: ") + env);
      }
    }
    seeds.push_back(s);
  }
  if (num_seeds > 1) {
    const auto base = seeds.front();
    seeds.clear();
    for (std::size_t i = 0; i < num_seeds; ++i) seeds.push_back(base + i);
  }
  return seeds;
}

inline ProjectConfig base_config(const std::string& config_path) {
  return config_path.empty() ? ProjectConfig{} : load_config(config_path);
}

inline std::vector<Treatment> resolve_treatments(const std::vector<std::string>& names, bool all) {
  if (all || names.empty()) return {Treatment::a, Treatment::b, Treatment::c};
  std::vector<Treatment> out;
  for (const auto& n : names) out.push_back(parse_treatment(n));
  return out;
}

inline void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

/// Runs `n` independent tasks on up to `jobs` threads. Failures are rethrown
/// after all workers stop, lowest task index first, so the reported error does
/// not depend on scheduling.
template <class Task>
void run_parallel(std::size_t n, unsigned jobs, Task&& task) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct CellResult {
  nlohmann::json manifest;
};

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string suite = "sim_exp";
  std::vector<std::string> treatments;
  bool all_treatments = false;
  std::vector<std::string> recommenders;
  std::vector<std::uint64_t> seeds;
  std::size_t num_seeds = 1;
  std::string out = ".";
  unsigned jobs = 1;
  SimOverrides overrides;
};

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  auto cfg = base_config(a.config);
  a.overrides.apply(cfg);
  const Suite suite = parse_suite(a.suite);
  const auto treatments = resolve_treatments(a.treatments, a.all_treatments);
  std::vector<RecommenderKind> kinds;
  for (const auto& r : a.recommenders) kinds.push_back(parse_recommender_kind(r));
  if (kinds.empty()) kinds = {RecommenderKind::random, RecommenderKind::toppop, RecommenderKind::latent_factor};
  const auto seeds = resolve_seeds(a.seeds, a.num_seeds);
  cfg.sim.validate();
  if (cfg.smoothing_window < 1) throw ConfigError("--window must be >= 1");

  struct Cell {
    Treatment treatment;
    RecommenderKind kind;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto t : treatments)
    for (auto k : kinds)
      for (auto s : seeds) cells.push_back({t, k, s});

  const fs::path dir(a.out);
  ensure_dir(dir);
  std::vector<nlohmann::json> cell_manifests(cells.size());
  run_parallel(cells.size(), a.jobs, [&](std::size_t i) {
    const auto& cell = cells[i];
    SimConfig sc = cfg.sim;
    sc.thresholds = standard_thresholds(suite, cell.treatment, cfg.sim.thresholds.mode);
    sc.recommender = cell.kind;
    sc.seed = cell.seed;
    const auto trace = run(sc);
    const std::string stem = std::string(to_string(suite)) + "_" + std::string(to_string(cell.treatment)) + "_" +
                             std::string(to_string(cell.kind)) + "_" + std::to_string(cell.seed);
    trace_table(trace).write_csv((dir / (stem + "_trace.csv")).string());
    utility_table(trace, cfg.smoothing_window).write_csv((dir / (stem + "_utility.csv")).string());
    fractions_table(trace).write_csv((dir / (stem + "_fractions.csv")).string());
    const auto f = ratings_distribution(trace.loop_entries());
    cell_manifests[i] = {
        {"treatment", to_string(cell.treatment)},
        {"recommender", to_string(cell.kind)},
        {"seed", cell.seed},
        {"thresholds", {{"t1", sc.thresholds.t1}, {"t2", sc.thresholds.t2}}},
        {"cutoffs", {{"c1", trace.cutoffs.c1}, {"c2", trace.cutoffs.c2}}},
        {"init_records", trace.init_count},
        {"loop_records", trace.entries.size() - trace.init_count},
        {"loop_fractions", {f.dislike, f.like, f.superlike}},
        {"files", {stem + "_trace.csv", stem + "_utility.csv", stem + "_fractions.csv"}},
    };
  });

  const auto effective = to_json(cfg.sim, cfg.smoothing_window);
  nlohmann::json manifest = {
      {"tool", "ratelab"},
      {"version", version},
      {"command", "simulate"},
      {"suite", to_string(suite)},
      {"config", effective},
      {"config_hash", hash_hex(effective.dump())},
      {"cells", cell_manifests},
  };
  write_json(manifest, dir / (std::string(to_string(suite)) + "_manifest.json"));
  out << "simulate: wrote " << cells.size() << " cell(s) to " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string config;
  std::string suite = "sim_exp";
  std::vector<std::string> treatments;
  bool all_treatments = false;
  std::vector<std::uint64_t> seeds;
  std::string out;  // empty: stdout
  SimOverrides overrides;
};

/// Cutoffs exactly as `simulate` resolves them for the same seed.
inline int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  auto cfg = base_config(a.config);
  a.overrides.apply(cfg);
  const Suite suite = parse_suite(a.suite);
  const auto seed = resolve_seeds(a.seeds, 1).front();
  cfg.sim.seed = seed;
  cfg.sim.validate();
  const Environment env = generate_environment(seeded_env_config(cfg.sim));
  Table t{{"treatment", "c1", "c2"}, {}};
  for (auto tr : resolve_treatments(a.treatments, a.all_treatments)) {
    SimConfig sc = cfg.sim;
    sc.thresholds = standard_thresholds(suite, tr, cfg.sim.thresholds.mode);
    const auto c = resolve_run_cutoffs(sc, env);
    t.add_row({std::string(to_string(tr)), format_real(c.c1), format_real(c.c2)});
  }
  if (a.out.empty()) {
    t.write_csv(out);
  } else {
    t.write_csv(a.out);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string input;
  std::string analysis;
  std::string config;
  std::string out = ".";
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> cap, min_ratings, resamples, bins;
  std::optional<double> level;
  std::optional<std::string> group_by;
  bool with_frac_personalized = false;
  std::string rejects;
  unsigned jobs = 1;
};

inline int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  auto cfg = base_config(a.config);
  auto& an = cfg.analysis;
  if (a.cap) an.cap = *a.cap;
  if (a.min_ratings) an.min_ratings = *a.min_ratings;
  if (a.resamples) an.resamples = *a.resamples;
  if (a.bins) an.histogram.bins = *a.bins;
  if (a.level) an.level = *a.level;
  if (a.group_by) an.group_by = parse_group_by(*a.group_by);
  const auto seed = resolve_seeds(a.seeds, 1).front();

  const fs::path dir(a.out);
  ensure_dir(dir);
  const auto ingest = ingest_csv(a.input, cfg.columns);
  if (!a.rejects.empty()) write_rejects(ingest.rejects, a.rejects);

  const std::string name = a.analysis;
  const std::string stem = [&] {
    std::string s = name;
    std::replace(s.begin(), s.end(), '-', '_');
    return s;
  }();

  nlohmann::json manifest = {
      {"tool", "ratelab"},
      {"version", version},
      {"command", "analyze"},
      {"analysis", name},
      {"input", a.input},
      {"seed", seed},
      {"rows_read", ingest.rows_read},
      {"rows_rejected", ingest.rejects.size()},
      {"standardization", "covariates standardized after filtering and capping"},
  };
  nlohmann::json settings = {{"min_ratings", an.min_ratings},
                             {"resamples", an.resamples},
                             {"level", an.level},
                             {"histogram_bins", an.histogram.bins},
                             {"with_frac_personalized", a.with_frac_personalized}};

  Dataset ds = ingest.dataset;
  auto apply_filter = [&] {
    const auto before = ds.size();
    auto f = filter_min_ratings(ds, an.min_ratings);
    ds = std::move(f.dataset);
    manifest["filter"] = {{"min_ratings", an.min_ratings}, {"records_before", before}, {"records_after", ds.size()},
                          {"rounds", f.rounds}, {"emptied", f.emptied}};
    if (f.emptied) throw DataError("no records survive the minimum-ratings filter");
  };
  auto apply_cap = [&](std::optional<std::size_t> cap) {
    if (!cap) return;
    const auto before = ds.size();
    ds = cap_ratings(ds, *cap, seed);
    manifest["cap"] = {{"cap", *cap}, {"records_before", before}, {"records_after", ds.size()}};
  };
  auto write_regression = [&](const DesignBuild& build) {
    const auto res = ols(build.design, an.level);
    coefficient_table(res).write_csv((dir / (stem + "_coefficients.csv")).string());
    std::ofstream txt(dir / (stem + "_summary.txt"), std::ios::binary);
    txt << format_regression_summary(res, build.response_name);
    Table ex{{"row", "reason"}, {}};
    for (const auto& e : build.excluded) ex.add_row({e.key, e.reason});
    ex.write_csv((dir / (stem + "_excluded.csv")).string());
    manifest["design"] = {{"rows", build.design.rows()},
                          {"columns", build.design.names},
                          {"excluded_rows", build.excluded.size()},
                          {"group_field", build.grouping.prefix()}};
    manifest["fit"] = {{"r_squared", res.r_squared},
                       {"adj_r_squared", res.adj_r_squared},
                       {"f_statistic", res.f_statistic},
                       {"n_observations", res.n_observations}};
    manifest["outputs"] = {stem + "_coefficients.csv", stem + "_summary.txt", stem + "_excluded.csv"};
  };

  if (name == "single-rating-regression") {
    apply_filter();
    apply_cap(an.cap ? an.cap : std::optional<std::size_t>(100));
    write_regression(build_single_rating_design(ds, an.group_by));
  } else if (name == "mean-consistency") {
    apply_filter();
    apply_cap(an.cap);
    write_regression(build_mean_consistency_design(stratified_split(ds, seed, an.group_by), a.with_frac_personalized, an.group_by));
  } else if (name == "variance-ci") {
    apply_filter();
    apply_cap(an.cap);
    variance_ci_table(ds, an.resamples, an.level, seed, an.group_by, std::max(1u, a.jobs)).write_csv((dir / "variance_ci.csv").string());
    manifest["outputs"] = {"variance_ci.csv"};
  } else if (name == "descriptives") {
    DescriptiveOptions opt;
    opt.histogram = an.histogram;
    opt.group_by = an.group_by;
    const auto rep = descriptive_suite(ds, opt);
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [tname, table] : rep.tables) {
      const auto file = "descriptives_" + tname + ".csv";
      table.write_csv((dir / file).string());
      files.push_back(file);
    }
    manifest["outputs"] = files;
    manifest["skipped"] = rep.skipped;
  } else if (name == "split") {
    apply_filter();
    apply_cap(an.cap);
    const auto split = stratified_split(ds, seed, an.group_by);
    write_dataset_csv(split.train, (dir / "split_train.csv").string());
    write_dataset_csv(split.test, (dir / "split_test.csv").string());
    manifest["outputs"] = {"split_train.csv", "split_test.csv"};
    manifest["split"] = {{"train", split.train.size()}, {"test", split.test.size()}};
  } else {
    throw ConfigError("unknown analysis '" + name + "'");
  }
  if (an.cap) settings["cap"] = *an.cap;
  manifest["settings"] = settings;
  manifest["config_hash"] = hash_hex(settings.dump());
  write_json(manifest, dir / (stem + "_manifest.json"));
  out << "analyze " << name << ": " << ds.size() << " records analysed, results in " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string in = ".";
  std::string out = "summary.csv";
  std::string utility_out;
};

namespace detail {

inline Table read_table(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read '" + path.string() + "'");
  Table t;
  std::size_t line = 0;
  if (!read_csv_record(is, t.header, line)) throw DataError("'" + path.string() + "' is empty");
  std::vector<std::string> row;
  while (read_csv_record(is, row, line))
    if (row.size() == t.header.size()) t.rows.push_back(row);
  return t;
}

inline double to_double(const std::string& s, const fs::path& file) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw DataError("'" + file.string() + "': not a number: '" + s + "'");
  }
}

}  // namespace detail

/// Merges per-cell fraction and utility CSVs of a simulate output directory
/// into one summary row per cell, optionally with seed-averaged utility series.
inline int cmd_report(const ReportArgs& a, std::ostream& out) {
  const std::regex pattern(R"((sim_exp|sim_ctld)_([abc])_(random|toppop|latent_factor)_(\d+)_fractions\.csv)");
  struct Key {
    std::string suite, treatment, recommender;
    std::uint64_t seed;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, fs::path> cells;
  if (!fs::is_directory(a.in)) throw IoError("'" + a.in + "' is not a directory");
  for (const auto& entry : fs::directory_iterator(a.in)) {
    std::smatch m;
    const auto fname = entry.path().filename().string();
    if (std::regex_match(fname, m, pattern)) cells[{m[1], m[2], m[3], std::stoull(m[4])}] = entry.path();
  }
  if (cells.empty()) throw DataError("no *_fractions.csv files found in '" + a.in + "'");

  Table summary{{"suite", "treatment", "recommender", "seed", "frac_dislike", "frac_like", "frac_superlike", "mean_utility",
                 "final_quarter_utility"},
                {}};
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<std::vector<double>>> series;
  for (const auto& [k, frac_path] : cells) {
    const auto frac = detail::read_table(frac_path);
    std::map<std::string, std::string> f;
    for (const auto& r : frac.rows) f[r.at(0)] = r.at(1);
    auto util_path = frac_path;
    util_path.replace_filename(k.suite + "_" + k.treatment + "_" + k.recommender + "_" + std::to_string(k.seed) + "_utility.csv");
    const auto util = detail::read_table(util_path);
    std::vector<double> u;
    for (const auto& r : util.rows) u.push_back(detail::to_double(r.at(1), util_path));
    double total = 0.0, tail = 0.0;
    const std::size_t tail_start = u.size() - u.size() / 4;
    for (std::size_t i = 0; i < u.size(); ++i) {
      total += u[i];
      if (i >= tail_start) tail += u[i];
    }
    const auto n = static_cast<double>(u.size());
    const auto tail_n = static_cast<double>(u.size() - tail_start);
    summary.add_row({k.suite, k.treatment, k.recommender, std::to_string(k.seed), f["dislike"], f["like"], f["superlike"],
                     u.empty() ? "" : format_real(total / n), tail_n > 0 ? format_real(tail / tail_n) : ""});
    series[{k.suite, k.treatment, k.recommender}].push_back(std::move(u));
  }
  summary.write_csv(a.out);

  if (!a.utility_out.empty()) {
    Table mean_series{{"suite", "treatment", "recommender", "iteration", "mean_utility", "n_seeds"}, {}};
    for (const auto& [k, runs] : series) {
      std::size_t len = runs.front().size();
      for (const auto& r : runs) len = std::min(len, r.size());
      for (std::size_t t = 0; t < len; ++t) {
        double s = 0.0;
        for (const auto& r : runs) s += r[t];
        mean_series.add_row({std::get<0>(k), std::get<1>(k), std::get<2>(k), std::to_string(t),
                             format_real(s / static_cast<double>(runs.size())), std::to_string(runs.size())});
      }
    }
    mean_series.write_csv(a.utility_out);
  }
  out << "report: summarized " << cells.size() << " cell(s) into " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"ratelab: recommender feedback-loop simulator and rating analytics"};
  app.set_version_flag("--version", version);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "run a (treatment x recommender x seed) grid of simulations");
  simulate->add_option("--config", sim.config, "JSON config file");
  simulate->add_option("--suite", sim.suite, "threshold suite")->check(CLI::IsMember({"sim_exp", "sim_ctld"}));
  simulate->add_option("--treatment", sim.treatments, "treatment(s) a|b|c (default: all)");
  simulate->add_flag("--all-treatments", sim.all_treatments, "run treatments a, b and c");
  simulate->add_option("--recommender", sim.recommenders, "random|toppop|latent_factor (default: all)");
  simulate->add_option("--seed", sim.seeds, "root seed(s); falls back to RATELAB_SEED");
  simulate->add_option("--num-seeds", sim.num_seeds, "expand the seed into this many consecutive seeds");
  simulate->add_option("--out", sim.out, "output directory");
  simulate->add_option("--jobs", sim.jobs, "parallel grid cells")->check(CLI::PositiveNumber);
  sim.overrides.bind(*simulate);

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "print the resolved rating cutoffs per treatment");
  calibrate->add_option("--config", cal.config, "JSON config file");
  calibrate->add_option("--suite", cal.suite, "threshold suite")->check(CLI::IsMember({"sim_exp", "sim_ctld"}));
  calibrate->add_option("--treatment", cal.treatments, "treatment(s) a|b|c (default: all)");
  calibrate->add_flag("--all-treatments", cal.all_treatments, "treatments a, b and c");
  calibrate->add_option("--seed", cal.seeds, "root seed; falls back to RATELAB_SEED")->expected(0, 1);
  calibrate->add_option("--out", cal.out, "output CSV (default: stdout)");
  cal.overrides.bind(*calibrate);

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "regressions and descriptive statistics over a rating CSV");
  analyze->add_option("input", an.input, "rating CSV")->required();
  analyze->add_option("--analysis", an.analysis, "analysis to run")
      ->required()
      ->check(CLI::IsMember({"single-rating-regression", "mean-consistency", "variance-ci", "descriptives", "split"}));
  analyze->add_option("--config", an.config, "JSON config file (column mapping, analysis defaults)");
  analyze->add_option("--out", an.out, "output directory");
  analyze->add_option("--seed", an.seeds, "seed; falls back to RATELAB_SEED")->expected(0, 1);
  analyze->add_option("--cap", an.cap, "max ratings per user and per item");
  analyze->add_option("--min-ratings", an.min_ratings, "min ratings per user and per item (fixed point)");
  analyze->add_option("--level", an.level, "confidence level");
  analyze->add_option("--resamples", an.resamples, "bootstrap resamples");
  analyze->add_option("--bins", an.bins, "user mean-score histogram bins");
  analyze->add_option("--group-by", an.group_by, "auto|none|period|treatment");
  analyze->add_flag("--with-frac-personalized", an.with_frac_personalized, "add frac_personalized_test (mean-consistency)");
  analyze->add_option("--rejects", an.rejects, "write rejected input rows to this CSV");
  analyze->add_option("--jobs", an.jobs, "bootstrap threads")->check(CLI::PositiveNumber);

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "merge simulate outputs into one summary CSV");
  report->add_option("--in", rep.in, "simulate output directory");
  report->add_option("--out", rep.out, "summary CSV path");
  report->add_option("--utility-out", rep.utility_out, "seed-averaged utility series CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::config);
  }

  try {
    if (*simulate) return cmd_simulate(sim, out);
    if (*calibrate) return cmd_calibrate(cal, out);
    if (*analyze) return cmd_analyze(an, out);
    if (*report) return cmd_report(rep, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::runtime);
  }
  return 0;
}

}  // namespace ratelab::cli
