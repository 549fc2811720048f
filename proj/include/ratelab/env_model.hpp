#pragma once

// Simulated population: latent user/item factors, ground-truth preferences
// and the noisy threshold model that turns preferences into ordinal ratings.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ratelab/error.hpp"
#include "ratelab/random.hpp"

namespace ratelab {

enum class Rating : std::uint8_t { dislike = 0, like = 1, superlike = 2 };

inline constexpr int to_int(Rating r) noexcept { return static_cast<int>(r); }

inline Rating rating_from_int(int v) {
  if (v < 0 || v > 2) throw DataError("rating value out of range: " + std::to_string(v));
  return static_cast<Rating>(v);
}

enum class Treatment : std::uint8_t { a, b, c };
enum class Suite : std::uint8_t { sim_exp, sim_ctld };
enum class ThresholdMode : std::uint8_t { quantile, raw };

inline std::string_view to_string(Treatment t) noexcept {
  switch (t) {
    case Treatment::a: return "a";
    case Treatment::b: return "b";
    case Treatment::c: return "c";
  }
  return "?";
}

inline std::string_view to_string(Suite s) noexcept { return s == Suite::sim_exp ? "sim_exp" : "sim_ctld"; }

inline std::string_view to_string(ThresholdMode m) noexcept {
  return m == ThresholdMode::quantile ? "quantile" : "raw";
}

inline Treatment parse_treatment(std::string_view s) {
  if (s == "a") return Treatment::a;
  if (s == "b") return Treatment::b;
  if (s == "c") return Treatment::c;
  throw ConfigError("unknown treatment '" + std::string(s) + "' (expected a, b or c)");
}

inline Suite parse_suite(std::string_view s) {
  if (s == "sim_exp") return Suite::sim_exp;
  if (s == "sim_ctld") return Suite::sim_ctld;
  throw ConfigError("unknown suite '" + std::string(s) + "' (expected sim_exp or sim_ctld)");
}

inline ThresholdMode parse_threshold_mode(std::string_view s) {
  if (s == "quantile") return ThresholdMode::quantile;
  if (s == "raw") return ThresholdMode::raw;
  throw ConfigError("unknown threshold mode '" + std::string(s) + "'");
}

struct EnvConfig {
  std::size_t num_users = 100;
  std::size_t num_items = 5000;
  std::size_t latent_dim = 8;
  double noise_sigma = 0.5;
  std::array<double, 3> rating_weights{0.0, 1.0, 2.0};  // dislike, like, superlike
  std::uint64_t seed = 1;

  void validate() const {
    if (num_users < 1 || num_items < 1 || latent_dim < 1)
      throw ConfigError("environment dimensions must be >= 1 (users=" + std::to_string(num_users) +
                        ", items=" + std::to_string(num_items) + ", latent_dim=" + std::to_string(latent_dim) +
                        ")");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be finite and >= 0");
    if (!(rating_weights[0] < rating_weights[1] && rating_weights[1] < rating_weights[2]))
      throw ConfigError("rating_weights must be strictly increasing");
  }

  double weight(Rating r) const noexcept { return rating_weights[static_cast<std::size_t>(r)]; }
};

using FactorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Environment {
  FactorMatrix user_factors;  // num_users x latent_dim, entries in [0,1]
  FactorMatrix item_factors;  // num_items x latent_dim, entries >= 0
  EnvConfig config;

  std::size_t num_users() const noexcept { return static_cast<std::size_t>(user_factors.rows()); }
  std::size_t num_items() const noexcept { return static_cast<std::size_t>(item_factors.rows()); }
};

/// Draws user factors from U[0,1] and item factors from Gamma(shape 2, scale 1).
/// User factors are filled first (row-major), then item factors, from one
/// stream seeded by `config.seed`.
inline Environment generate_environment(const EnvConfig& config) {
  config.validate();
  Environment env;
  env.config = config;
  const auto users = static_cast<Eigen::Index>(config.num_users);
  const auto items = static_cast<Eigen::Index>(config.num_items);
  const auto dim = static_cast<Eigen::Index>(config.latent_dim);
  env.user_factors.resize(users, dim);
  env.item_factors.resize(items, dim);

  Rng rng{config.seed};
  for (Eigen::Index u = 0; u < users; ++u)
    for (Eigen::Index d = 0; d < dim; ++d) env.user_factors(u, d) = uniform01(rng);
  std::gamma_distribution<double> gamma(2.0, 1.0);
  for (Eigen::Index i = 0; i < items; ++i)
    for (Eigen::Index d = 0; d < dim; ++d) env.item_factors(i, d) = gamma(rng);
  return env;
}

inline double true_preference(const Environment& env, std::size_t user, std::size_t item) {
  if (user >= env.num_users())
    throw IndexError("user index " + std::to_string(user) + " out of range [0," + std::to_string(env.num_users()) + ")");
  if (item >= env.num_items())
    throw IndexError("item index " + std::to_string(item) + " out of range [0," + std::to_string(env.num_items()) + ")");
  return env.user_factors.row(static_cast<Eigen::Index>(user)).dot(env.item_factors.row(static_cast<Eigen::Index>(item)));
}

struct ThresholdSpec {
  ThresholdMode mode = ThresholdMode::quantile;
  double t1 = 0.0;
  double t2 = 1.0;
  Treatment label = Treatment::a;
  Suite suite = Suite::sim_exp;

  void validate() const {
    if (!(t1 < t2)) throw ConfigError("threshold t1 must be < t2");
    if (mode == ThresholdMode::quantile && (t1 < 0.0 || t2 > 1.0))
      throw ConfigError("quantile thresholds must satisfy 0 <= t1 < t2 <= 1");
  }
};

/// Threshold pairs of the two simulated suites, by treatment.
inline ThresholdSpec standard_thresholds(Suite suite, Treatment treatment,
                                         ThresholdMode mode = ThresholdMode::quantile) {
  static constexpr std::array<std::array<double, 2>, 3> exp_values{{{0.4028, 0.8845}, {0.4276, 0.8508}, {0.4240, 0.8270}}};
  static constexpr std::array<std::array<double, 2>, 3> ctld_values{{{0.33, 0.66}, {0.25, 0.5}, {0.5, 0.75}}};
  const auto& row = (suite == Suite::sim_exp ? exp_values : ctld_values)[static_cast<std::size_t>(treatment)];
  return ThresholdSpec{mode, row[0], row[1], treatment, suite};
}

struct Cutoffs {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// Type-7 empirical quantile (linear interpolation between order statistics).
/// Reorders `sample` in place.
inline double empirical_quantile(std::vector<double>& sample, double q) {
  if (sample.empty()) throw EmptyInputError("quantile of empty sample");
  const double h = static_cast<double>(sample.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sample.size() - 1);
  std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(lo), sample.end());
  const double x_lo = sample[lo];
  if (hi == lo) return x_lo;
  // after nth_element everything right of lo is >= x_lo; the next order statistic is their minimum
  const double x_hi = *std::min_element(sample.begin() + static_cast<std::ptrdiff_t>(lo) + 1, sample.end());
  return x_lo + (h - static_cast<double>(lo)) * (x_hi - x_lo);
}

/// Noisy preferences of `n` uniformly random (user,item) pairs; the order of
/// draws per sample is user, item, noise.
inline std::vector<double> sample_noisy_preferences(const Environment& env, double noise_sigma, std::size_t n, Rng& rng) {
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto u = uniform_index(rng, env.num_users());
    const auto i = uniform_index(rng, env.num_items());
    const double z = standard_normal(rng);
    out.push_back(true_preference(env, u, i) + noise_sigma * z);
  }
  return out;
}

inline constexpr std::size_t min_quantile_samples = 10'000;

inline Cutoffs resolve_cutoffs(const ThresholdSpec& spec, const Environment& env, double noise_sigma,
                               std::size_t mc_samples, Rng& rng) {
  spec.validate();
  Cutoffs out;
  if (spec.mode == ThresholdMode::raw) {
    out = {spec.t1, spec.t2};
  } else {
    if (mc_samples < min_quantile_samples)
      throw ConfigError("quantile cutoffs need at least " + std::to_string(min_quantile_samples) + " samples");
    auto sample = sample_noisy_preferences(env, noise_sigma, mc_samples, rng);
    out.c1 = empirical_quantile(sample, spec.t1);
    out.c2 = empirical_quantile(sample, spec.t2);
  }
  if (!(out.c1 < out.c2))
    throw DataError("degenerate thresholds: resolved cutoffs (" + std::to_string(out.c1) + ", " +
                    std::to_string(out.c2) + ") are not increasing");
  return out;
}

/// Noise-free thresholding: [c1, c2) is a like, >= c2 a superlike.
inline constexpr Rating threshold_rating(double noisy_preference, const Cutoffs& cutoffs) noexcept {
  if (noisy_preference < cutoffs.c1) return Rating::dislike;
  if (noisy_preference < cutoffs.c2) return Rating::like;
  return Rating::superlike;
}

/// Always consumes exactly one standard-normal draw, also when sigma is 0, so
/// the stream stays aligned across noise levels.
inline Rating observe_rating(double preference, double noise_sigma, const Cutoffs& cutoffs, Rng& rng) {
  const double eps = noise_sigma * standard_normal(rng);
  return threshold_rating(preference + eps, cutoffs);
}

}  // namespace ratelab
