#pragma once

// The recommend -> rate -> update feedback loop and its two metrics.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ratelab/aggregation.hpp"
#include "ratelab/env_model.hpp"
#include "ratelab/error.hpp"
#include "ratelab/random.hpp"
#include "ratelab/recommenders.hpp"

namespace ratelab {

/// Anything the loop can drive: the three built-in policies, or a test oracle.
template <class P>
concept RecommendationPolicy = requires(P p, const P cp, std::span<const Interaction> batch, ExclusionMask mask, Rng& rng) {
  p.update(batch);
  { cp.recommend(std::size_t{}, mask, rng) } -> std::convertible_to<std::size_t>;
};

struct SimConfig {
  EnvConfig env;
  ThresholdSpec thresholds = standard_thresholds(Suite::sim_exp, Treatment::a);
  RecommenderKind recommender = RecommenderKind::random;
  LatentFactorHyperparams latent_factor;
  std::size_t n_iter = 1000;
  double rating_frequency = 0.1;
  double ratio_init_ratings = 0.01;
  std::size_t mc_samples = 200'000;  // Monte Carlo size for quantile cutoffs
  std::uint64_t seed = 1;

  void validate() const {
    env.validate();
    thresholds.validate();
    latent_factor.validate();
    if (n_iter < 1) throw ConfigError("n_iter must be >= 1");
    if (!(rating_frequency > 0.0 && rating_frequency <= 1.0)) throw ConfigError("rating_frequency must lie in (0, 1]");
    if (!(ratio_init_ratings >= 0.0 && ratio_init_ratings < 1.0)) throw ConfigError("ratio_init_ratings must lie in [0, 1)");
  }

  std::size_t users_per_iteration() const {
    // tolerance absorbs binary round-off such as 0.1 * 30 = 3.0000000000000004
    return static_cast<std::size_t>(std::ceil(rating_frequency * static_cast<double>(env.num_users) - 1e-9));
  }

  std::size_t init_rating_count() const {
    return static_cast<std::size_t>(
        std::llround(ratio_init_ratings * static_cast<double>(env.num_users) * static_cast<double>(env.num_items)));
  }
};

enum class Phase : std::uint8_t { init, loop };

inline std::string_view to_string(Phase p) noexcept { return p == Phase::init ? "init" : "loop"; }

struct TraceEntry {
  std::int64_t iteration = -1;  // -1 for the initialization phase
  std::size_t user = 0;
  std::size_t item = 0;
  double true_pref = 0.0;
  Rating rating = Rating::dislike;
  Phase phase = Phase::init;
};

struct SimulationTrace {
  std::vector<TraceEntry> entries;
  std::vector<double> iteration_utility;  // mean true preference of that iteration's recommendations
  Cutoffs cutoffs;
  std::size_t init_count = 0;

  std::span<const TraceEntry> init_entries() const { return std::span(entries).first(init_count); }
  std::span<const TraceEntry> loop_entries() const { return std::span(entries).subspan(init_count); }
};

/// Root-seed derivations shared by every run with the same seed, so runs that
/// differ only in thresholds or recommender see the same population and the
/// same initial (user, item) pairs.
inline EnvConfig seeded_env_config(const SimConfig& config) {
  EnvConfig env = config.env;
  env.seed = derive_seed(config.seed, "env");
  return env;
}

inline Cutoffs resolve_run_cutoffs(const SimConfig& config, const Environment& env) {
  Rng rng = substream(config.seed, "cutoffs");
  return resolve_cutoffs(config.thresholds, env, config.env.noise_sigma, config.mc_samples, rng);
}

/// Runs the loop on a prepared environment with an arbitrary policy.
template <RecommendationPolicy Policy>
SimulationTrace simulate(const SimConfig& config, const Environment& env, const Cutoffs& cutoffs, Policy& policy) {
  config.validate();
  const std::size_t users = env.num_users();
  const std::size_t items = env.num_items();
  const double sigma = config.env.noise_sigma;

  Rng init_rng = substream(config.seed, "init");
  Rng noise_rng = substream(config.seed, "noise");
  Rng user_rng = substream(config.seed, "users");
  Rng rec_rng = substream(config.seed, "recommend");

  SimulationTrace trace;
  trace.cutoffs = cutoffs;
  std::vector<std::uint8_t> rated(users * items, 0);
  auto observe = [&](std::int64_t iteration, std::size_t u, std::size_t i, Phase phase) {
    const double pref = true_preference(env, u, i);
    const Rating r = observe_rating(pref, sigma, cutoffs, noise_rng);
    rated[u * items + i] = 1;
    trace.entries.push_back({iteration, u, i, pref, r, phase});
    return Interaction{u, i, config.env.weight(r)};
  };

  // initialization: uniformly random pairs over the full user x item grid
  const std::size_t init_count = config.init_rating_count();
  {
    std::vector<std::size_t> pairs(users * items);
    std::iota(pairs.begin(), pairs.end(), std::size_t{0});
    for (std::size_t k = 0; k < init_count; ++k) {
      const auto j = k + uniform_index(init_rng, pairs.size() - k);
      std::swap(pairs[k], pairs[j]);
    }
    std::vector<Interaction> batch;
    batch.reserve(init_count);
    for (std::size_t k = 0; k < init_count; ++k) batch.push_back(observe(-1, pairs[k] / items, pairs[k] % items, Phase::init));
    trace.init_count = init_count;
    policy.update(batch);
  }

  const std::size_t per_iter = std::min(config.users_per_iteration(), users);
  std::vector<std::size_t> order(users);
  std::vector<Interaction> batch;
  trace.iteration_utility.reserve(config.n_iter);
  for (std::size_t it = 0; it < config.n_iter; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < per_iter; ++k) std::swap(order[k], order[k + uniform_index(user_rng, users - k)]);

    batch.clear();
    double utility = 0.0;
    for (std::size_t k = 0; k < per_iter; ++k) {
      const std::size_t u = order[k];
      const ExclusionMask mask(rated.data() + u * items, items);
      std::size_t item = 0;
      try {
        item = policy.recommend(u, mask, rec_rng);
      } catch (const ExhaustionError&) {
        throw ExhaustionError("iteration " + std::to_string(it) + ": user " + std::to_string(u) +
                              " has rated every item");
      }
      if (item >= items || mask[item]) throw Error(ErrorKind::runtime, "policy returned an excluded item");
      batch.push_back(observe(static_cast<std::int64_t>(it), u, item, Phase::loop));
      utility += trace.entries.back().true_pref;
    }
    trace.iteration_utility.push_back(utility / static_cast<double>(per_iter));
    policy.update(batch);
  }
  return trace;
}

inline SimulationTrace run(const SimConfig& config) {
  config.validate();
  const Environment env = generate_environment(seeded_env_config(config));
  const Cutoffs cutoffs = resolve_run_cutoffs(config, env);
  Recommender policy = Recommender::create(config.recommender, env.num_users(), env.num_items(), config.latent_factor,
                                           derive_seed(config.seed, "recommender"));
  return simulate(config, env, cutoffs, policy);
}

/// Within-user then across-user fractions of the given entries.
inline RatingFractions ratings_distribution(std::span<const TraceEntry> entries) {
  return rating_fractions(entries, [](const TraceEntry& e) { return e.user; },
                          [](const TraceEntry& e) { return e.rating; });
}

inline RatingFractions ratings_distribution(const SimulationTrace& trace) { return ratings_distribution(trace.entries); }

/// Trailing mean over the last `window` values (fewer at the start); window 1
/// returns the input.
inline std::vector<double> trailing_mean(std::span<const double> series, std::size_t window) {
  if (window < 1) throw ConfigError("smoothing window must be >= 1");
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    sum += series[t];
    if (t >= window) sum -= series[t - window];
    const auto n = std::min(t + 1, window);
    out[t] = window == 1 ? series[t] : sum / static_cast<double>(n);
  }
  return out;
}

/// Mean ground-truth preference of each loop iteration's recommendations,
/// recomputed from the environment, then smoothed.
inline std::vector<double> utility_over_time(const SimulationTrace& trace, const Environment& env, std::size_t window = 1) {
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  for (const auto& e : trace.loop_entries()) {
    const auto it = static_cast<std::size_t>(e.iteration);
    if (it >= sums.size()) {
      sums.resize(it + 1, 0.0);
      counts.resize(it + 1, 0);
    }
    sums[it] += true_preference(env, e.user, e.item);
    ++counts[it];
  }
  std::vector<double> raw(sums.size(), 0.0);
  for (std::size_t t = 0; t < sums.size(); ++t)
    raw[t] = counts[t] ? sums[t] / static_cast<double>(counts[t]) : 0.0;
  return trailing_mean(raw, window);
}

}  // namespace ratelab
