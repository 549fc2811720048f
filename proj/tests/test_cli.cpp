#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "ratelab/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome call(std::vector<std::string> args) {
  args.insert(args.begin(), "ratelab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = ratelab::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> small_sim(const fs::path& out) {
  return {"simulate", "--users", "20", "--items", "60", "--latent-dim", "3", "--iterations", "10",
          "--mc-samples", "10000", "--lf-epochs", "2", "--out", out.string()};
}

std::vector<std::string> with(std::vector<std::string> base, std::initializer_list<std::string> extra) {
  base.insert(base.end(), extra);
  return base;
}

std::size_t count_files(const fs::path& dir, const std::string& suffix) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().filename().string().ends_with(suffix);
  return n;
}

}  // namespace

TEST_CASE("simulate writes the documented file names", "[cli]") {
  const auto dir = testutil::scratch_dir("cli_names");
  const auto r = call(with(small_sim(dir), {"--treatment", "a", "--recommender", "toppop", "--seed", "7"}));
  REQUIRE(r.code == 0);
  for (const char* f : {"sim_exp_a_toppop_7_trace.csv", "sim_exp_a_toppop_7_utility.csv", "sim_exp_a_toppop_7_fractions.csv",
                        "sim_exp_manifest.json"})
    CHECK(fs::exists(dir / f));
  CHECK(slurp(dir / "sim_exp_a_toppop_7_trace.csv").starts_with("iteration,user_id,item_id,true_pref,rating,phase\n"));
  CHECK(slurp(dir / "sim_exp_a_toppop_7_utility.csv").starts_with("iteration,mean_utility,smoothed_utility\n"));
  CHECK(slurp(dir / "sim_exp_a_toppop_7_fractions.csv").starts_with("option,fraction\ndislike,"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "sim_exp_manifest.json"));
  CHECK(manifest["config"]["env"]["num_users"] == 20);
  CHECK(manifest["cells"].size() == 1);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("simulate grid over all treatments and recommenders", "[cli]") {
  const auto dir = testutil::scratch_dir("cli_grid");
  REQUIRE(call(with(small_sim(dir), {"--suite", "sim_ctld", "--all-treatments", "--num-seeds", "2", "--jobs", "3"})).code == 0);
  CHECK(count_files(dir, "_trace.csv") == 3 * 3 * 2);
  CHECK(fs::exists(dir / "sim_ctld_c_latent_factor_2_utility.csv"));
}

TEST_CASE("simulate reruns are byte-identical regardless of jobs", "[cli]") {
  const auto a = testutil::scratch_dir("cli_det_a"), b = testutil::scratch_dir("cli_det_b");
  REQUIRE(call(with(small_sim(a), {"--seed", "3", "--jobs", "1"})).code == 0);
  REQUIRE(call(with(small_sim(b), {"--seed", "3", "--jobs", "4"})).code == 0);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    REQUIRE(fs::exists(b / e.path().filename()));
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    ++compared;
  }
  CHECK(compared == 3 * 3 * 3 + 1);
}

TEST_CASE("calibrate prints the cutoffs simulate uses", "[cli]") {
  const auto dir = testutil::scratch_dir("cli_calibrate");
  const auto r = call({"calibrate", "--users", "20", "--items", "60", "--latent-dim", "3", "--mc-samples", "10000",
                       "--seed", "5"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string header, row_a;
  std::getline(lines, header);
  std::getline(lines, row_a);
  CHECK(header == "treatment,c1,c2");
  CHECK(row_a.starts_with("a,"));

  REQUIRE(call(with(small_sim(dir), {"--treatment", "a", "--recommender", "random", "--seed", "5"})).code == 0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "sim_exp_manifest.json"));
  const auto c1 = manifest["cells"][0]["cutoffs"]["c1"].get<double>();
  CHECK(row_a.substr(2, row_a.find(',', 2) - 2) == ratelab::format_real(c1));

  const auto raw = call({"calibrate", "--suite", "sim_ctld", "--threshold-mode", "raw", "--treatment", "b", "--users", "5",
                         "--items", "5"});
  CHECK(raw.out == "treatment,c1,c2\nb,0.25,0.5\n");
}

TEST_CASE("descriptives on a two-record file", "[cli]") {
  const auto dir = testutil::scratch_dir("cli_desc");
  std::ofstream(dir / "toy.csv") << "user_id,item_id,rating,timestamp\nu1,s1,2,1700000000\nu1,s2,2,1700000100\n";
  const auto r = call({"analyze", (dir / "toy.csv").string(), "--analysis", "descriptives", "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "out" / "descriptives_fractions.csv") ==
        "group,option,fraction\nall,dislike,0\nall,like,0\nall,superlike,1\n");
  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "descriptives_manifest.json"));
  CHECK(manifest["skipped"].size() == 3);
  CHECK(fs::exists(dir / "out" / "descriptives_user_mean_histogram.csv"));
}

TEST_CASE("analyze end to end on a simulated trace", "[cli]") {
  const auto dir = testutil::scratch_dir("cli_analyze");
  // a denser world so every user and item passes the default filter
  REQUIRE(call({"simulate", "--users", "60", "--items", "40", "--latent-dim", "3", "--iterations", "30", "--ratio-init",
                "0.3", "--mc-samples", "10000", "--treatment", "a", "--recommender", "random", "--seed", "1", "--out",
                dir.string()})
              .code == 0);
  // trace -> rating CSV with the default column names
  std::ifstream trace(dir / "sim_exp_a_random_1_trace.csv");
  std::ofstream csv(dir / "ratings.csv");
  csv << "user_id,item_id,rating,timestamp\n";
  std::string line;
  std::getline(trace, line);
  while (std::getline(trace, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    csv << "u" << f[1] << ",i" << f[2] << "," << f[4] << "," << std::stoll(f[0]) + 1 << "\n";
  }
  csv.close();

  const auto out = (dir / "out").string();
  const auto input = (dir / "ratings.csv").string();
  auto reg = call({"analyze", input, "--analysis", "single-rating-regression", "--out", out});
  REQUIRE(reg.code == 0);
  CHECK(slurp(dir / "out" / "single_rating_regression_coefficients.csv").starts_with("name,coef,std_err,t,p_value,ci_low,ci_high\nIntercept,"));
  CHECK(slurp(dir / "out" / "single_rating_regression_summary.txt").find("mean_user_rating_others") != std::string::npos);

  auto var = call({"analyze", input, "--analysis", "variance-ci", "--resamples", "1000", "--out", out, "--jobs", "2"});
  REQUIRE(var.code == 0);
  const auto table = slurp(dir / "out" / "variance_ci.csv");
  CHECK(table.starts_with("group,subset,n_users,variance,ci_low,ci_high,half_width\nall,all,"));

  CHECK(call({"analyze", input, "--analysis", "split", "--out", out}).code == 0);
  CHECK(fs::exists(dir / "out" / "split_train.csv"));
  CHECK(call({"analyze", input, "--analysis", "mean-consistency", "--out", out}).code == 0);
  CHECK(call({"analyze", input, "--analysis", "variance-ci", "--resamples", "10", "--out", out}).code == 2);
}

TEST_CASE("exit codes for bad input and bad configuration", "[cli]") {
  const auto dir = testutil::scratch_dir("cli_errors");
  std::ofstream(dir / "bad.csv") << "user_id,item_id,rating\nu1,s1,2\n";
  std::ofstream(dir / "bad.json") << R"({"env": {"num_users": 0}})";
  std::ofstream(dir / "typo.json") << R"({"env": {"num_user": 10}})";
  std::ofstream(dir / "ok.csv") << "user_id,item_id,rating,timestamp\nu1,s1,2,1\n";

  // the column mapping is configuration: a missing mandatory column is a data-schema problem of the input
  const auto missing = call({"analyze", (dir / "bad.csv").string(), "--analysis", "descriptives", "--out", dir.string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("timestamp") != std::string::npos);

  CHECK(call({"analyze", (dir / "absent.csv").string(), "--analysis", "descriptives", "--out", dir.string()}).code == 3);
  CHECK(call({"analyze", (dir / "ok.csv").string(), "--analysis", "single-rating-regression", "--out", dir.string()}).code == 3);
  CHECK(call({"simulate", "--config", (dir / "bad.json").string(), "--out", dir.string()}).code == 2);
  CHECK(call({"simulate", "--config", (dir / "typo.json").string(), "--out", dir.string()}).code == 2);
  CHECK(call({"simulate", "--recommender", "svd", "--out", dir.string()}).code == 2);
  CHECK(call({"simulate", "--suite", "sim_other"}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  CHECK(call({"--version"}).code == 0);
  CHECK(call({"simulate", "--users", "2", "--items", "3", "--rating-frequency", "1", "--ratio-init", "0",
              "--threshold-mode", "raw", "--iterations", "4", "--recommender", "random", "--treatment", "a", "--out",
              dir.string()})
            .code == 4);
}

TEST_CASE("RATELAB_SEED is the fallback seed", "[cli]") {
  const auto dir = testutil::scratch_dir("cli_env_seed");
  ::setenv("RATELAB_SEED", "42", 1);
  const auto r = call(with(small_sim(dir), {"--treatment", "b", "--recommender", "random"}));
  ::unsetenv("RATELAB_SEED");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "sim_exp_b_random_42_trace.csv"));
  CHECK(ratelab::cli::resolve_seeds({}, 3) == std::vector<std::uint64_t>{1, 2, 3});
  ::setenv("RATELAB_SEED", "nope", 1);
  CHECK_THROWS_AS(ratelab::cli::resolve_seeds({}, 1), ratelab::ConfigError);
  ::unsetenv("RATELAB_SEED");
}

TEST_CASE("report merges a simulate directory", "[cli]") {
  const auto dir = testutil::scratch_dir("cli_report");
  REQUIRE(call(with(small_sim(dir / "sim"), {"--treatment", "a", "--num-seeds", "2"})).code == 0);
  const auto r = call({"report", "--in", (dir / "sim").string(), "--out", (dir / "summary.csv").string(), "--utility-out",
                       (dir / "series.csv").string()});
  REQUIRE(r.code == 0);
  const auto summary = slurp(dir / "summary.csv");
  CHECK(summary.starts_with(
      "suite,treatment,recommender,seed,frac_dislike,frac_like,frac_superlike,mean_utility,final_quarter_utility\n"));
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 3 * 2);
  const auto series = slurp(dir / "series.csv");
  CHECK(series.starts_with("suite,treatment,recommender,iteration,mean_utility,n_seeds\n"));
  CHECK(std::count(series.begin(), series.end(), '\n') == 1 + 3 * 10);
  CHECK(call({"report", "--in", (dir / "nothing").string()}).code == 3);
}
