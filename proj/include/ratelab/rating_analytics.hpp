#pragma once

// Regression designs and descriptive tables over rating records: fixed-point
// filtering, per-user/per-item capping, leave-one-out designs, song-stratified
// train/test splits and the descriptive suite.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ratelab/aggregation.hpp"
#include "ratelab/dataset.hpp"
#include "ratelab/random.hpp"
#include "ratelab/sim_loop.hpp"
#include "ratelab/stats_engine.hpp"
#include "ratelab/table.hpp"

namespace ratelab {

// ---------------------------------------------------------------------------
// grouping

enum class GroupBy : std::uint8_t { automatic, none, period, treatment };

inline GroupBy parse_group_by(std::string_view s) {
  if (s == "auto") return GroupBy::automatic;
  if (s == "none") return GroupBy::none;
  if (s == "period") return GroupBy::period;
  if (s == "treatment") return GroupBy::treatment;
  throw ConfigError("unknown group-by '" + std::string(s) + "' (expected auto, none, period or treatment)");
}

/// The categorical field that splits a dataset into groups. Treatment wins
/// over period under automatic resolution.
struct Grouping {
  GroupBy field = GroupBy::none;

  static Grouping resolve(const Dataset& ds, GroupBy requested) {
    switch (requested) {
      case GroupBy::automatic:
        if (ds.has_treatment()) return {GroupBy::treatment};
        if (ds.has_period()) return {GroupBy::period};
        return {GroupBy::none};
      case GroupBy::period:
        if (!ds.has_period()) throw DataError("grouping by period requires the period field");
        return {GroupBy::period};
      case GroupBy::treatment:
        if (!ds.has_treatment()) throw DataError("grouping by treatment requires the treatment field");
        return {GroupBy::treatment};
      case GroupBy::none: return {GroupBy::none};
    }
    return {GroupBy::none};
  }

  bool active() const noexcept { return field != GroupBy::none; }

  /// Column-name prefix of the group dummies.
  std::string prefix() const { return field == GroupBy::period ? "Pre_Post" : field == GroupBy::treatment ? "treatment" : ""; }

  std::string label(const RatingRecord& r) const {
    switch (field) {
      case GroupBy::period: return std::string(to_string(*r.period));
      case GroupBy::treatment: return std::string(to_string(*r.treatment));
      default: return "all";
    }
  }

  /// Levels present in the data, sorted; the first is the reference level.
  std::vector<std::string> levels(const Dataset& ds) const {
    std::set<std::string> s;
    for (const auto& r : ds.records()) s.insert(label(r));
    return {s.begin(), s.end()};
  }
};

// ---------------------------------------------------------------------------
// filtering and capping

struct FilterResult {
  Dataset dataset;
  std::size_t rounds = 0;
  bool emptied = false;  // warning flag: nothing survived
};

/// Repeatedly drops users and items with fewer than `k` ratings until every
/// survivor has at least `k`. The fixed point is the largest such subset.
inline FilterResult filter_min_ratings(const Dataset& ds, std::size_t k = 10) {
  if (k < 1) throw ConfigError("min-ratings k must be >= 1");
  const auto recs = ds.records();
  std::vector<bool> alive(recs.size(), true);
  FilterResult out;
  for (bool changed = true; changed;) {
    changed = false;
    ++out.rounds;
    std::map<std::string_view, std::size_t> user_n, item_n;
    for (std::size_t i = 0; i < recs.size(); ++i)
      if (alive[i]) {
        ++user_n[recs[i].user_id];
        ++item_n[recs[i].item_id];
      }
    for (std::size_t i = 0; i < recs.size(); ++i)
      if (alive[i] && (user_n[recs[i].user_id] < k || item_n[recs[i].item_id] < k)) {
        alive[i] = false;
        changed = true;
      }
  }
  out.dataset = ds.subset_where(alive);
  out.emptied = out.dataset.empty();
  return out;
}

/// Randomly subsamples so that no user and no item keeps more than `cap`
/// ratings; alternates user and item passes until nothing changes.
inline Dataset cap_ratings(const Dataset& ds, std::size_t cap, std::uint64_t seed) {
  if (cap < 1) throw ConfigError("cap must be >= 1");
  Rng rng = substream(seed, "cap");
  const auto recs = ds.records();
  std::vector<bool> alive(recs.size(), true);
  auto pass = [&](const Dataset::Index& index) {
    bool changed = false;
    for (const auto& [key, idx] : index) {
      std::vector<std::size_t> live;
      for (auto i : idx)
        if (alive[i]) live.push_back(i);
      if (live.size() <= cap) continue;
      shuffle(live.begin(), live.end(), rng);
      for (std::size_t j = cap; j < live.size(); ++j) alive[live[j]] = false;
      changed = true;
    }
    return changed;
  };
  while (true) {
    const bool u = pass(ds.by_user());
    const bool i = pass(ds.by_item());
    if (!u && !i) break;
  }
  return ds.subset_where(alive);
}

// ---------------------------------------------------------------------------
// designs

struct Exclusion {
  std::string key;
  std::string reason;
};

/// A design plus what went into it: unstandardized covariates by column name,
/// the source of every row, and the rows left out.
struct DesignBuild {
  DesignMatrix design;
  std::string response_name;
  std::vector<std::string> row_keys;
  std::map<std::string, std::vector<double>> raw;
  std::vector<Exclusion> excluded;
  Grouping grouping;
};

struct LeaveOneOut {
  bool defined = false;
  double user_mean_others = 0.0;
  double item_mean_others = 0.0;
  std::size_t user_count = 0;  // ratings by the user within the record's group
  std::size_t item_count = 0;
};

/// Leave-one-out means of each record's user and item, computed within the
/// record's group. Undefined when the user or item has a single rating there.
inline std::vector<LeaveOneOut> leave_one_out(const Dataset& ds, const Grouping& g) {
  using Key = std::pair<std::string_view, std::string>;
  std::map<Key, std::pair<double, std::size_t>> user_acc, item_acc;
  const auto recs = ds.records();
  for (const auto& r : recs) {
    const double v = to_int(r.rating);
    auto& u = user_acc[{r.user_id, g.label(r)}];
    u.first += v;
    ++u.second;
    auto& it = item_acc[{r.item_id, g.label(r)}];
    it.first += v;
    ++it.second;
  }
  std::vector<LeaveOneOut> out(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    const auto label = g.label(r);
    const auto& [us, un] = user_acc.at({r.user_id, label});
    const auto& [is, in] = item_acc.at({r.item_id, label});
    const double v = to_int(r.rating);
    auto& o = out[i];
    o.user_count = un;
    o.item_count = in;
    o.defined = un >= 2 && in >= 2;
    if (o.defined) {
      o.user_mean_others = (us - v) / static_cast<double>(un - 1);
      o.item_mean_others = (is - v) / static_cast<double>(in - 1);
    }
  }
  return out;
}

namespace detail {

inline std::vector<double> standardized(const std::string& name, std::span<const double> raw) {
  try {
    return standardize(raw);
  } catch (const DegenerateError& e) {
    throw DegenerateError("column '" + name + "': " + e.what());
  }
}

// Assembles named columns into a design matrix, preserving order.
class ColumnSet {
 public:
  void add(std::string name, std::vector<double> values) {
    names_.push_back(std::move(name));
    cols_.push_back(std::move(values));
  }

  DesignMatrix finish(std::span<const double> response) const {
    DesignMatrix d;
    d.names = names_;
    const auto n = static_cast<Eigen::Index>(response.size());
    d.x.resize(n, static_cast<Eigen::Index>(cols_.size()));
    for (std::size_t j = 0; j < cols_.size(); ++j)
      for (Eigen::Index i = 0; i < n; ++i) d.x(i, static_cast<Eigen::Index>(j)) = cols_[j][static_cast<std::size_t>(i)];
    d.y = Eigen::Map<const Eigen::VectorXd>(response.data(), n);
    return d;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> cols_;
};

inline std::vector<double> product(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

// Dummies for every level (no global intercept) or a constant column when
// ungrouped; returns the per-row level labels.
inline void add_group_columns(ColumnSet& cols, const Grouping& g, const std::vector<std::string>& row_levels,
                              const std::vector<std::string>& levels) {
  if (!g.active()) {
    cols.add("Intercept", std::vector<double>(row_levels.size(), 1.0));
    return;
  }
  for (const auto& level : levels) {
    std::vector<double> d(row_levels.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = row_levels[i] == level ? 1.0 : 0.0;
    cols.add(g.prefix() + "[" + level + "]", std::move(d));
  }
}

// covariate, then covariate x dummy for each non-reference level
inline void add_with_group_interactions(ColumnSet& cols, const std::string& name, const std::vector<double>& z,
                                        const Grouping& g, const std::vector<std::string>& row_levels,
                                        const std::vector<std::string>& levels) {
  cols.add(name, z);
  if (!g.active()) return;
  for (std::size_t l = 1; l < levels.size(); ++l) {
    std::vector<double> v(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) v[i] = row_levels[i] == levels[l] ? z[i] : 0.0;
    cols.add(name + ":" + g.prefix() + "[T." + levels[l] + "]", std::move(v));
  }
}

}  // namespace detail

/// One row per rating: group constants, personalized flag, leave-one-out user
/// and song means (with group interactions), rating counts and their
/// interactions with the means. Covariates are standardized over the final
/// rows; the response is the raw rating value.
inline DesignBuild build_single_rating_design(const Dataset& ds, GroupBy group_by = GroupBy::automatic) {
  DesignBuild out;
  out.grouping = Grouping::resolve(ds, group_by);
  out.response_name = "user_song_rating";
  const auto& g = out.grouping;
  const auto loo = leave_one_out(ds, g);
  const auto recs = ds.records();

  std::vector<double> user_mean, item_mean, user_n, item_n, personalized, response;
  std::vector<std::string> row_levels;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (!loo[i].defined) {
      out.excluded.push_back({std::to_string(i), loo[i].user_count < 2 ? "user has no other rating in group"
                                                                         : "song has no other rating in group"});
      continue;
    }
    out.row_keys.push_back(std::to_string(i));
    row_levels.push_back(g.label(r));
    user_mean.push_back(loo[i].user_mean_others);
    item_mean.push_back(loo[i].item_mean_others);
    user_n.push_back(static_cast<double>(loo[i].user_count));
    item_n.push_back(static_cast<double>(loo[i].item_count));
    if (ds.has_recommender_class())
      personalized.push_back(*r.recommender_class == RecommenderClass::personalized ? 1.0 : 0.0);
    response.push_back(to_int(r.rating));
  }
  if (response.empty()) throw EmptyInputError("no rating has a defined leave-one-out mean");

  out.raw["mean_user_rating_others"] = user_mean;
  out.raw["mean_song_rating_others"] = item_mean;
  out.raw["user_ratings_count"] = user_n;
  out.raw["song_ratings_count"] = item_n;

  const auto z_user = detail::standardized("mean_user_rating_others", user_mean);
  const auto z_item = detail::standardized("mean_song_rating_others", item_mean);
  const auto z_user_n = detail::standardized("user_ratings_count", user_n);
  const auto z_item_n = detail::standardized("song_ratings_count", item_n);

  std::set<std::string> level_set(row_levels.begin(), row_levels.end());
  const std::vector<std::string> levels(level_set.begin(), level_set.end());

  detail::ColumnSet cols;
  detail::add_group_columns(cols, g, row_levels, levels);
  if (ds.has_recommender_class()) cols.add("personalized", personalized);
  detail::add_with_group_interactions(cols, "mean_user_rating_others", z_user, g, row_levels, levels);
  detail::add_with_group_interactions(cols, "mean_song_rating_others", z_item, g, row_levels, levels);
  cols.add("user_ratings_count", z_user_n);
  cols.add("mean_user_rating_others:user_ratings_count", detail::product(z_user, z_user_n));
  cols.add("song_ratings_count", z_item_n);
  cols.add("mean_song_rating_others:song_ratings_count", detail::product(z_item, z_item_n));
  out.design = cols.finish(response);
  return out;
}

struct SplitPair {
  Dataset train;
  Dataset test;
};

/// Shuffles each (song, group) stratum and deals its records alternately to
/// train and test, starting on a random side, so every stratum differs by at
/// most one record between halves.
inline SplitPair stratified_split(const Dataset& ds, std::uint64_t seed, GroupBy group_by = GroupBy::automatic) {
  const auto g = Grouping::resolve(ds, group_by);
  Rng rng = substream(seed, "split");
  std::map<std::pair<std::string_view, std::string>, std::vector<std::size_t>> strata;
  const auto recs = ds.records();
  for (std::size_t i = 0; i < recs.size(); ++i) strata[{recs[i].item_id, g.label(recs[i])}].push_back(i);

  std::vector<bool> to_train(recs.size(), false);
  for (auto& [key, idx] : strata) {
    shuffle(idx.begin(), idx.end(), rng);
    const auto first = uniform_index(rng, 2);
    for (std::size_t j = 0; j < idx.size(); ++j) to_train[idx[j]] = (j % 2) == first;
  }
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < recs.size(); ++i) (to_train[i] ? train : test).push_back(i);
  return {ds.subset(train), ds.subset(test)};
}

/// One row per (song, group) present in both halves. Response: the song's
/// test-set mean. Covariates: mean over the song's test raters of each rater's
/// train-set mean, the song's train-set mean, train-set counts (song count and
/// mean rater count) and their interactions, optionally the test-set share of
/// personalized recommendations. All covariates and the response are
/// standardized.
inline DesignBuild build_mean_consistency_design(const SplitPair& split, bool with_frac_personalized,
                                                 GroupBy group_by = GroupBy::automatic) {
  DesignBuild out;
  out.response_name = "mean_song_rating_test";
  // resolve on the union schema; both halves share it
  out.grouping = Grouping::resolve(split.train.empty() ? split.test : split.train, group_by);
  const auto& g = out.grouping;
  if (with_frac_personalized && !split.test.has_recommender_class())
    throw DataError("frac_personalized_test requires the recommender_class field");

  using Key = std::pair<std::string, std::string>;  // (id, group)
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
    std::size_t personalized = 0;
    std::set<std::string> raters;
  };
  std::map<Key, Acc> user_train, song_train, song_test;
  for (const auto& r : split.train.records()) {
    auto& u = user_train[{r.user_id, g.label(r)}];
    u.sum += to_int(r.rating);
    ++u.n;
    auto& s = song_train[{r.item_id, g.label(r)}];
    s.sum += to_int(r.rating);
    ++s.n;
  }
  for (const auto& r : split.test.records()) {
    auto& s = song_test[{r.item_id, g.label(r)}];
    s.sum += to_int(r.rating);
    ++s.n;
    s.raters.insert(r.user_id);
    if (r.recommender_class && *r.recommender_class == RecommenderClass::personalized) ++s.personalized;
  }

  std::vector<double> user_mean, song_mean, song_n, user_n, frac, response;
  std::vector<std::string> row_levels;
  std::set<Key> keys;
  for (const auto& [k, v] : song_train) keys.insert(k);
  for (const auto& [k, v] : song_test) keys.insert(k);
  for (const auto& key : keys) {
    const auto row_key = key.first + "|" + key.second;
    const auto tr = song_train.find(key);
    const auto te = song_test.find(key);
    if (tr == song_train.end()) {
      out.excluded.push_back({row_key, "song has no train-set ratings"});
      continue;
    }
    if (te == song_test.end()) {
      out.excluded.push_back({row_key, "song has no test-set ratings"});
      continue;
    }
    double rater_mean_sum = 0.0, rater_n_sum = 0.0;
    std::string missing;
    for (const auto& user : te->second.raters) {
      const auto ut = user_train.find({user, key.second});
      if (ut == user_train.end()) {
        missing = user;
        break;
      }
      rater_mean_sum += ut->second.sum / static_cast<double>(ut->second.n);
      rater_n_sum += static_cast<double>(ut->second.n);
    }
    if (!missing.empty()) {
      out.excluded.push_back({row_key, "test rater " + missing + " has no train-set ratings"});
      continue;
    }
    const double raters = static_cast<double>(te->second.raters.size());
    out.row_keys.push_back(row_key);
    row_levels.push_back(key.second);
    user_mean.push_back(rater_mean_sum / raters);
    user_n.push_back(rater_n_sum / raters);
    song_mean.push_back(tr->second.sum / static_cast<double>(tr->second.n));
    song_n.push_back(static_cast<double>(tr->second.n));
    frac.push_back(static_cast<double>(te->second.personalized) / static_cast<double>(te->second.n));
    response.push_back(te->second.sum / static_cast<double>(te->second.n));
  }
  if (response.empty()) throw EmptyInputError("no song is present in both halves of the split");

  out.raw["mean_user_rating_train"] = user_mean;
  out.raw["mean_song_rating_train"] = song_mean;
  out.raw["count_song_ratings_train"] = song_n;
  out.raw["count_user_ratings_train"] = user_n;
  out.raw["mean_song_rating_test"] = response;
  if (with_frac_personalized) out.raw["frac_personalized_test"] = frac;

  const auto z_user = detail::standardized("mean_user_rating_train", user_mean);
  const auto z_song = detail::standardized("mean_song_rating_train", song_mean);
  const auto z_song_n = detail::standardized("count_song_ratings_train", song_n);
  const auto z_user_n = detail::standardized("count_user_ratings_train", user_n);
  const auto z_response = detail::standardized("mean_song_rating_test", response);

  std::set<std::string> level_set(row_levels.begin(), row_levels.end());
  const std::vector<std::string> levels(level_set.begin(), level_set.end());

  detail::ColumnSet cols;
  detail::add_group_columns(cols, g, row_levels, levels);
  if (with_frac_personalized) cols.add("frac_personalized_test", detail::standardized("frac_personalized_test", frac));
  detail::add_with_group_interactions(cols, "mean_user_rating_train", z_user, g, row_levels, levels);
  detail::add_with_group_interactions(cols, "mean_song_rating_train", z_song, g, row_levels, levels);
  cols.add("count_song_ratings_train", z_song_n);
  cols.add("mean_song_rating_train:count_song_ratings_train", detail::product(z_song, z_song_n));
  cols.add("count_user_ratings_train", z_user_n);
  cols.add("mean_user_rating_train:count_user_ratings_train", detail::product(z_user, z_user_n));
  out.design = cols.finish(z_response);
  return out;
}

// ---------------------------------------------------------------------------
// descriptive statistics

inline std::map<std::string, double> user_means(const Dataset& ds, const std::vector<std::size_t>& indices) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (auto i : indices) {
    auto& a = acc[ds[i].user_id];
    a.first += to_int(ds[i].rating);
    ++a.second;
  }
  std::map<std::string, double> out;
  for (const auto& [u, a] : acc) out[u] = a.first / static_cast<double>(a.second);
  return out;
}

inline std::map<std::string, std::vector<std::size_t>> records_by_group(const Dataset& ds, const Grouping& g) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < ds.size(); ++i) out[g.label(ds[i])].push_back(i);
  return out;
}

/// "YYYY-MM" of a UTC epoch timestamp, plus a month ordinal for adjacency.
inline std::pair<std::string, int> utc_month(std::int64_t epoch_seconds) {
  using namespace std::chrono;
  const auto days = floor<std::chrono::days>(sys_seconds{seconds{epoch_seconds}});
  const year_month_day ymd{days};
  const int y = static_cast<int>(ymd.year());
  const unsigned m = static_cast<unsigned>(ymd.month());
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", y, m);
  return {buf, y * 12 + static_cast<int>(m) - 1};
}

struct HistogramSpec {
  std::size_t bins = 20;
  double low = 0.0;
  double high = 2.0;
};

struct DescriptiveOptions {
  HistogramSpec histogram;
  std::size_t min_class_ratings = 10;  // songs need strictly more than this many of each class
  GroupBy group_by = GroupBy::automatic;
};

struct DescriptiveReport {
  std::map<std::string, Table> tables;
  std::vector<std::string> skipped;  // "<analysis>: <reason>"
};

inline Table rating_fraction_table(const Dataset& ds, const Grouping& g) {
  Table t{{"group", "option", "fraction"}, {}};
  for (const auto& [group, idx] : records_by_group(ds, g)) {
    const auto f = rating_fractions(idx, [&](std::size_t i) { return ds[i].user_id; }, [&](std::size_t i) { return ds[i].rating; });
    for (auto r : {Rating::dislike, Rating::like, Rating::superlike})
      t.add_row({group, std::string(rating_name(r)), format_real(f[r])});
  }
  return t;
}

inline Table user_mean_histogram(const Dataset& ds, const Grouping& g, const HistogramSpec& spec) {
  if (spec.bins < 1 || !(spec.high > spec.low)) throw ConfigError("histogram needs >= 1 bin over a nonempty range");
  Table t{{"group", "bin_low", "bin_high", "count", "fraction"}, {}};
  const double width = (spec.high - spec.low) / static_cast<double>(spec.bins);
  for (const auto& [group, idx] : records_by_group(ds, g)) {
    const auto means = user_means(ds, idx);
    std::vector<std::size_t> counts(spec.bins, 0);
    for (const auto& [u, m] : means) {
      auto b = static_cast<std::ptrdiff_t>(std::floor((m - spec.low) / width));
      b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(spec.bins) - 1);  // right edge is closed
      ++counts[static_cast<std::size_t>(b)];
    }
    for (std::size_t b = 0; b < spec.bins; ++b)
      t.add_row({group, format_real(spec.low + width * static_cast<double>(b)),
                 format_real(spec.low + width * static_cast<double>(b + 1)), std::to_string(counts[b]),
                 format_real(static_cast<double>(counts[b]) / static_cast<double>(means.size()))});
  }
  return t;
}

inline Table personalized_vs_random_table(const Dataset& ds, const Grouping& g, std::size_t min_each) {
  Table t{{"group", "item_id", "n_personalized", "n_random", "mean_personalized", "mean_random"}, {}};
  for (const auto& [group, idx] : records_by_group(ds, g)) {
    std::map<std::string, std::array<std::pair<double, std::size_t>, 2>> acc;
    for (auto i : idx) {
      auto& a = acc[ds[i].item_id][static_cast<std::size_t>(*ds[i].recommender_class)];
      a.first += to_int(ds[i].rating);
      ++a.second;
    }
    for (const auto& [item, a] : acc) {
      const auto& [ps, pn] = a[0];
      const auto& [rs, rn] = a[1];
      if (pn <= min_each || rn <= min_each) continue;
      t.add_row({group, item, std::to_string(pn), std::to_string(rn), format_real(ps / static_cast<double>(pn)),
                 format_real(rs / static_cast<double>(rn))});
    }
  }
  return t;
}

inline Table frac_personalized_table(const Dataset& ds, const Grouping& g) {
  Table t{{"group", "item_id", "n", "frac_personalized", "mean_rating"}, {}};
  for (const auto& [group, idx] : records_by_group(ds, g)) {
    std::map<std::string, std::tuple<double, std::size_t, std::size_t>> acc;  // sum, n, personalized
    for (auto i : idx) {
      auto& [s, n, p] = acc[ds[i].item_id];
      s += to_int(ds[i].rating);
      ++n;
      if (*ds[i].recommender_class == RecommenderClass::personalized) ++p;
    }
    for (const auto& [item, a] : acc) {
      const auto& [s, n, p] = a;
      t.add_row({group, item, std::to_string(n), format_real(static_cast<double>(p) / static_cast<double>(n)),
                 format_real(s / static_cast<double>(n))});
    }
  }
  return t;
}

inline Table retention_table(const Dataset& ds, const Grouping& g) {
  Table t{{"group", "rating_count", "n_users", "share"}, {}};
  for (const auto& [group, idx] : records_by_group(ds, g)) {
    std::map<std::string, std::size_t> per_user;
    for (auto i : idx) ++per_user[ds[i].user_id];
    std::map<std::size_t, std::size_t> buckets;
    for (const auto& [u, n] : per_user) ++buckets[n];
    for (const auto& [n, users] : buckets)
      t.add_row({group, std::to_string(n), std::to_string(users),
                 format_real(static_cast<double>(users) / static_cast<double>(per_user.size()))});
  }
  return t;
}

/// Correlation of paired means when defined (>= 2 pairs, neither side constant).
inline std::optional<double> correlation_if_defined(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2) return std::nullopt;
  try {
    return pearson_correlation(x, y);
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

/// Per pair of consecutive calendar months: correlation of user mean ratings
/// over users who rated in both months.
inline Table month_pair_correlation_table(const Dataset& ds) {
  std::map<int, std::pair<std::string, std::vector<std::size_t>>> months;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto [label, ordinal] = utc_month(ds[i].timestamp);
    auto& m = months[ordinal];
    m.first = label;
    m.second.push_back(i);
  }
  Table t{{"month_a", "month_b", "n_users", "correlation"}, {}};
  for (auto it = months.begin(); it != months.end(); ++it) {
    const auto next = std::next(it);
    if (next == months.end() || next->first != it->first + 1) continue;
    const auto a = user_means(ds, it->second.second);
    const auto b = user_means(ds, next->second.second);
    std::vector<double> xa, xb;
    for (const auto& [u, m] : a)
      if (auto f = b.find(u); f != b.end()) {
        xa.push_back(m);
        xb.push_back(f->second);
      }
    const auto r = correlation_if_defined(xa, xb);
    t.add_row({it->second.first, next->second.first, std::to_string(xa.size()), r ? format_real(*r) : ""});
  }
  return t;
}

/// Per treatment and recommender class: correlation between each user's mean
/// rating before and after the timers.
inline Table before_after_correlation_table(const Dataset& ds) {
  Table t{{"treatment", "recommender_class", "n_users", "correlation"}, {}};
  for (auto tr : {Treatment::a, Treatment::b, Treatment::c})
    for (auto cls : {RecommenderClass::personalized, RecommenderClass::random}) {
      std::vector<std::size_t> pre, post;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& r = ds[i];
        if (*r.treatment != tr || *r.recommender_class != cls) continue;
        (*r.period == Period::pre_timers ? pre : post).push_back(i);
      }
      if (pre.empty() && post.empty()) continue;
      const auto a = user_means(ds, pre);
      const auto b = user_means(ds, post);
      std::vector<double> xa, xb;
      for (const auto& [u, m] : a)
        if (auto f = b.find(u); f != b.end()) {
          xa.push_back(m);
          xb.push_back(f->second);
        }
      const auto r = correlation_if_defined(xa, xb);
      t.add_row({std::string(to_string(tr)), std::string(to_string(cls)), std::to_string(xa.size()),
                 r ? format_real(*r) : ""});
    }
  return t;
}

/// Every descriptive table the dataset's fields allow; the rest are listed as
/// skipped with the missing field.
inline DescriptiveReport descriptive_suite(const Dataset& ds, const DescriptiveOptions& opt = {}) {
  if (ds.empty()) throw EmptyInputError("descriptive statistics of an empty dataset");
  DescriptiveReport rep;
  const auto g = Grouping::resolve(ds, opt.group_by);
  rep.tables["fractions"] = rating_fraction_table(ds, g);
  rep.tables["user_mean_histogram"] = user_mean_histogram(ds, g, opt.histogram);
  if (ds.has_recommender_class()) {
    rep.tables["personalized_vs_random"] = personalized_vs_random_table(ds, g, opt.min_class_ratings);
    rep.tables["frac_personalized"] = frac_personalized_table(ds, g);
  } else {
    rep.skipped.push_back("personalized_vs_random: missing field recommender_class");
    rep.skipped.push_back("frac_personalized: missing field recommender_class");
  }
  rep.tables["retention"] = retention_table(ds, g);
  rep.tables["month_correlation"] = month_pair_correlation_table(ds);
  if (ds.has_treatment() && ds.has_period() && ds.has_recommender_class()) {
    rep.tables["before_after_correlation"] = before_after_correlation_table(ds);
  } else {
    rep.skipped.push_back("before_after_correlation: needs treatment, period and recommender_class fields");
  }
  return rep;
}

/// Between-user variance of mean scores with bootstrap intervals, per group and
/// per recommendation subset (all, random, personalized).
inline Table variance_ci_table(const Dataset& ds, std::size_t n_resamples, double level, std::uint64_t seed,
                               GroupBy group_by = GroupBy::automatic, unsigned threads = 1) {
  if (ds.empty()) throw EmptyInputError("variance of an empty dataset");
  const auto g = Grouping::resolve(ds, group_by);
  Table t{{"group", "subset", "n_users", "variance", "ci_low", "ci_high", "half_width"}, {}};
  std::vector<std::pair<std::string, std::optional<RecommenderClass>>> subsets{{"all", std::nullopt}};
  if (ds.has_recommender_class()) {
    subsets.emplace_back("random", RecommenderClass::random);
    subsets.emplace_back("personalized", RecommenderClass::personalized);
  }
  for (const auto& [group, idx] : records_by_group(ds, g))
    for (const auto& [name, cls] : subsets) {
      std::vector<std::size_t> sel;
      for (auto i : idx)
        if (!cls || ds[i].recommender_class == cls) sel.push_back(i);
      std::vector<double> means;
      for (const auto& [u, m] : user_means(ds, sel)) means.push_back(m);
      if (means.size() < 2) {
        t.add_row({group, name, std::to_string(means.size()), "", "", "", ""});
        continue;
      }
      const auto ci = user_bootstrap_variance(means, n_resamples, level, derive_seed(seed, "variance-ci:" + group + ":" + name), threads);
      t.add_row({group, name, std::to_string(means.size()), format_real(ci.point), format_real(ci.ci_low),
                 format_real(ci.ci_high), format_real(ci.half_width())});
    }
  return t;
}

/// Simulated trace as rating records: ids "u<index>"/"i<index>", timestamp
/// iteration + 1 (0 for initialization ratings).
inline Dataset dataset_from_trace(const SimulationTrace& trace) {
  std::vector<RatingRecord> recs;
  recs.reserve(trace.entries.size());
  for (const auto& e : trace.entries)
    recs.push_back({"u" + std::to_string(e.user), "i" + std::to_string(e.item), e.rating, e.iteration + 1, std::nullopt,
                    std::nullopt, std::nullopt});
  return Dataset(std::move(recs));
}

}  // namespace ratelab
