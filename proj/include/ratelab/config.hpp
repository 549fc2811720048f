#pragma once

// The structured config file: one JSON object with a section per module.
// Precedence is built-in defaults < config file < command-line flags.

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "ratelab/env_model.hpp"
#include "ratelab/io.hpp"
#include "ratelab/rating_analytics.hpp"
#include "ratelab/recommenders.hpp"
#include "ratelab/sim_loop.hpp"

namespace ratelab {

struct AnalysisConfig {
  std::size_t min_ratings = 10;
  std::optional<std::size_t> cap;  // unset: 100 for the single-rating regression, off otherwise
  std::size_t resamples = 2000;
  double level = 0.95;
  GroupBy group_by = GroupBy::automatic;
  HistogramSpec histogram;
};

struct ProjectConfig {
  SimConfig sim;  // thresholds/recommender/seed are filled per grid cell
  std::size_t smoothing_window = 20;
  AnalysisConfig analysis;
  ColumnMapping columns;
};

namespace detail {

inline void check_keys(const nlohmann::json& section, const std::string& name, std::initializer_list<const char*> allowed) {
  if (!section.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : section.items())
    if (!ok.contains(k)) throw ConfigError("config section '" + name + "': unknown key '" + k + "'");
}

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace detail

inline ProjectConfig parse_config(const nlohmann::json& root) {
  ProjectConfig cfg;
  try {
    detail::check_keys(root, "<root>", {"env", "thresholds", "recommender", "simulation", "analysis", "columns"});
    if (root.contains("env")) {
      const auto& e = root["env"];
      detail::check_keys(e, "env", {"num_users", "num_items", "latent_dim", "noise_sigma", "rating_weights"});
      detail::read_if(e, "num_users", cfg.sim.env.num_users);
      detail::read_if(e, "num_items", cfg.sim.env.num_items);
      detail::read_if(e, "latent_dim", cfg.sim.env.latent_dim);
      detail::read_if(e, "noise_sigma", cfg.sim.env.noise_sigma);
      detail::read_if(e, "rating_weights", cfg.sim.env.rating_weights);
    }
    if (root.contains("thresholds")) {
      const auto& t = root["thresholds"];
      detail::check_keys(t, "thresholds", {"mode", "mc_samples"});
      if (t.contains("mode")) cfg.sim.thresholds.mode = parse_threshold_mode(t["mode"].get<std::string>());
      detail::read_if(t, "mc_samples", cfg.sim.mc_samples);
    }
    if (root.contains("recommender")) {
      const auto& r = root["recommender"];
      detail::check_keys(r, "recommender", {"dim", "learning_rate", "l2_penalty", "epochs", "init_scale", "incremental"});
      auto& lf = cfg.sim.latent_factor;
      detail::read_if(r, "dim", lf.dim);
      detail::read_if(r, "learning_rate", lf.learning_rate);
      detail::read_if(r, "l2_penalty", lf.l2_penalty);
      detail::read_if(r, "epochs", lf.epochs);
      detail::read_if(r, "init_scale", lf.init_scale);
      detail::read_if(r, "incremental", lf.incremental);
    }
    if (root.contains("simulation")) {
      const auto& s = root["simulation"];
      detail::check_keys(s, "simulation", {"n_iter", "rating_frequency", "ratio_init_ratings", "smoothing_window"});
      detail::read_if(s, "n_iter", cfg.sim.n_iter);
      detail::read_if(s, "rating_frequency", cfg.sim.rating_frequency);
      detail::read_if(s, "ratio_init_ratings", cfg.sim.ratio_init_ratings);
      detail::read_if(s, "smoothing_window", cfg.smoothing_window);
    }
    if (root.contains("analysis")) {
      const auto& a = root["analysis"];
      detail::check_keys(a, "analysis", {"min_ratings", "cap", "resamples", "level", "group_by", "histogram_bins"});
      detail::read_if(a, "min_ratings", cfg.analysis.min_ratings);
      if (a.contains("cap")) cfg.analysis.cap = a["cap"].get<std::size_t>();
      detail::read_if(a, "resamples", cfg.analysis.resamples);
      detail::read_if(a, "level", cfg.analysis.level);
      if (a.contains("group_by")) cfg.analysis.group_by = parse_group_by(a["group_by"].get<std::string>());
      detail::read_if(a, "histogram_bins", cfg.analysis.histogram.bins);
    }
    if (root.contains("columns")) cfg.columns = ColumnMapping::from_json(root["columns"]);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline ProjectConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Canonical JSON of the effective simulation settings (keys sorted).
inline nlohmann::json to_json(const SimConfig& s, std::size_t smoothing_window) {
  const auto& lf = s.latent_factor;
  return {
      {"env",
       {{"num_users", s.env.num_users},
        {"num_items", s.env.num_items},
        {"latent_dim", s.env.latent_dim},
        {"noise_sigma", s.env.noise_sigma},
        {"rating_weights", s.env.rating_weights}}},
      {"thresholds", {{"mode", to_string(s.thresholds.mode)}, {"mc_samples", s.mc_samples}}},
      {"recommender",
       {{"dim", lf.dim},
        {"learning_rate", lf.learning_rate},
        {"l2_penalty", lf.l2_penalty},
        {"epochs", lf.epochs},
        {"init_scale", lf.init_scale},
        {"incremental", lf.incremental}}},
      {"simulation",
       {{"n_iter", s.n_iter},
        {"rating_frequency", s.rating_frequency},
        {"ratio_init_ratings", s.ratio_init_ratings},
        {"smoothing_window", smoothing_window}}},
  };
}

inline std::string hash_hex(std::string_view text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

}  // namespace ratelab
