#pragma once

// The three recommendation policies: uniform random, top-popularity by mean
// rating, and a biased matrix-factorization model trained online by SGD.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ratelab/env_model.hpp"
#include "ratelab/error.hpp"
#include "ratelab/random.hpp"

namespace ratelab {

/// One observed rating in index space, value on the numeric rating scale.
struct Interaction {
  std::size_t user = 0;
  std::size_t item = 0;
  double value = 0.0;
};

enum class RecommenderKind : std::uint8_t { random, toppop, latent_factor };

inline std::string_view to_string(RecommenderKind k) noexcept {
  switch (k) {
    case RecommenderKind::random: return "random";
    case RecommenderKind::toppop: return "toppop";
    case RecommenderKind::latent_factor: return "latent_factor";
  }
  return "?";
}

inline RecommenderKind parse_recommender_kind(std::string_view s) {
  if (s == "random") return RecommenderKind::random;
  if (s == "toppop") return RecommenderKind::toppop;
  if (s == "latent_factor" || s == "libfm" || s == "mf") return RecommenderKind::latent_factor;
  throw ConfigError("unknown recommender '" + std::string(s) + "' (expected random, toppop or latent_factor)");
}

/// Item mask: nonzero entries may not be recommended.
using ExclusionMask = std::span<const std::uint8_t>;

namespace detail {

inline void check_ids(std::span<const Interaction> batch, std::size_t num_users, std::size_t num_items) {
  for (const auto& r : batch) {
    if (r.user >= num_users) throw IndexError("rating references user " + std::to_string(r.user) + " >= " + std::to_string(num_users));
    if (r.item >= num_items) throw IndexError("rating references item " + std::to_string(r.item) + " >= " + std::to_string(num_items));
  }
}

inline void check_mask(ExclusionMask excluded, std::size_t num_items) {
  if (excluded.size() != num_items)
    throw IndexError("exclusion mask has " + std::to_string(excluded.size()) + " entries, expected " + std::to_string(num_items));
}

[[noreturn]] inline void throw_exhausted(std::size_t user) {
  throw ExhaustionError("no recommendable item left for user " + std::to_string(user));
}

// Argmax of score(i) over non-excluded items, lowest index on ties.
template <class Score>
std::size_t argmax_item(std::size_t user, ExclusionMask excluded, Score&& score) {
  std::size_t best = excluded.size();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < excluded.size(); ++i) {
    if (excluded[i]) continue;
    const double s = score(i);
    if (best == excluded.size() || s > best_score) {
      best = i;
      best_score = s;
    }
  }
  if (best == excluded.size()) throw_exhausted(user);
  return best;
}

}  // namespace detail

class RandomRecommender {
 public:
  RandomRecommender(std::size_t num_users, std::size_t num_items) : num_users_(num_users), num_items_(num_items) {}

  void update(std::span<const Interaction> batch) { detail::check_ids(batch, num_users_, num_items_); }

  /// Uniform over the non-excluded items.
  std::size_t recommend(std::size_t user, ExclusionMask excluded, Rng& rng) const {
    detail::check_mask(excluded, num_items_);
    const auto open = static_cast<std::size_t>(std::count(excluded.begin(), excluded.end(), std::uint8_t{0}));
    if (open == 0) detail::throw_exhausted(user);
    auto k = uniform_index(rng, open);
    for (std::size_t i = 0; i < excluded.size(); ++i) {
      if (excluded[i]) continue;
      if (k-- == 0) return i;
    }
    detail::throw_exhausted(user);
  }

 private:
  std::size_t num_users_;
  std::size_t num_items_;
};

class PopularityTable {
 public:
  explicit PopularityTable(std::size_t num_items) : sums_(num_items, 0.0), counts_(num_items, 0) {}

  void add(std::size_t item, double value) {
    sums_.at(item) += value;
    ++counts_[item];
  }

  std::optional<double> average(std::size_t item) const {
    if (counts_.at(item) == 0) return std::nullopt;
    return sums_[item] / static_cast<double>(counts_[item]);
  }

  std::uint64_t count(std::size_t item) const { return counts_.at(item); }
  std::size_t size() const noexcept { return counts_.size(); }

 private:
  std::vector<double> sums_;
  std::vector<std::uint64_t> counts_;
};

class TopPopRecommender {
 public:
  TopPopRecommender(std::size_t num_users, std::size_t num_items) : num_users_(num_users), table_(num_items) {}

  void update(std::span<const Interaction> batch) {
    detail::check_ids(batch, num_users_, table_.size());
    for (const auto& r : batch) table_.add(r.item, r.value);
  }

  /// Highest average rating; items nobody rated rank below every rated item.
  std::size_t recommend(std::size_t user, ExclusionMask excluded, Rng&) const {
    detail::check_mask(excluded, table_.size());
    return detail::argmax_item(user, excluded, [&](std::size_t i) {
      const auto avg = table_.average(i);
      return avg ? *avg : -std::numeric_limits<double>::infinity();
    });
  }

  const PopularityTable& table() const noexcept { return table_; }

 private:
  std::size_t num_users_;
  PopularityTable table_;
};

struct LatentFactorHyperparams {
  std::size_t dim = 8;
  double learning_rate = 0.01;
  double l2_penalty = 0.05;
  std::size_t epochs = 10;
  double init_scale = 0.1;
  bool incremental = false;  // train on the new batch only instead of all ratings so far

  void validate() const {
    if (dim < 1) throw ConfigError("latent factor dim must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (!(l2_penalty >= 0.0) || !std::isfinite(l2_penalty)) throw ConfigError("l2_penalty must be >= 0");
    if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ConfigError("init_scale must be >= 0");
  }
};

/// Gradient of one record's loss
///   0.5 * (r - r_hat)^2 + 0.5 * l2 * (|p_u|^2 + |q_i|^2 + b_u^2 + b_i^2)
/// with r_hat = mu + b_u + b_i + <p_u, q_i>.
struct RecordGradient {
  Eigen::VectorXd user_vector;
  Eigen::VectorXd item_vector;
  double user_bias = 0.0;
  double item_bias = 0.0;
  double global_bias = 0.0;
};

/// Biased matrix factorization; the second-order factorization machine over
/// one-hot user and item ids reduces exactly to this model.
class LatentFactorModel {
 public:
  LatentFactorModel(std::size_t num_users, std::size_t num_items, const LatentFactorHyperparams& hp, std::uint64_t seed)
      : hp_(hp),
        user_vectors_(static_cast<Eigen::Index>(num_users), static_cast<Eigen::Index>(hp.dim)),
        item_vectors_(static_cast<Eigen::Index>(num_items), static_cast<Eigen::Index>(hp.dim)),
        user_bias_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_users))),
        item_bias_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_items))) {
    hp_.validate();
    if (num_users < 1 || num_items < 1) throw ConfigError("latent factor model needs >= 1 user and item");
    Rng rng{seed};
    for (Eigen::Index u = 0; u < user_vectors_.rows(); ++u)
      for (Eigen::Index d = 0; d < user_vectors_.cols(); ++d) user_vectors_(u, d) = hp_.init_scale * standard_normal(rng);
    for (Eigen::Index i = 0; i < item_vectors_.rows(); ++i)
      for (Eigen::Index d = 0; d < item_vectors_.cols(); ++d) item_vectors_(i, d) = hp_.init_scale * standard_normal(rng);
  }

  std::size_t num_users() const noexcept { return static_cast<std::size_t>(user_vectors_.rows()); }
  std::size_t num_items() const noexcept { return static_cast<std::size_t>(item_vectors_.rows()); }
  const LatentFactorHyperparams& hyperparams() const noexcept { return hp_; }

  double predict(std::size_t user, std::size_t item) const {
    const auto u = static_cast<Eigen::Index>(user);
    const auto i = static_cast<Eigen::Index>(item);
    return global_bias_ + user_bias_(u) + item_bias_(i) + user_vectors_.row(u).dot(item_vectors_.row(i));
  }

  double record_loss(const Interaction& r) const {
    const auto u = static_cast<Eigen::Index>(r.user);
    const auto i = static_cast<Eigen::Index>(r.item);
    const double e = r.value - predict(r.user, r.item);
    const double reg = user_vectors_.row(u).squaredNorm() + item_vectors_.row(i).squaredNorm() +
                       user_bias_(u) * user_bias_(u) + item_bias_(i) * item_bias_(i);
    return 0.5 * e * e + 0.5 * hp_.l2_penalty * reg;
  }

  /// Sum of per-record losses; the quantity SGD descends.
  double objective(std::span<const Interaction> records) const {
    double total = 0.0;
    for (const auto& r : records) total += record_loss(r);
    return total;
  }

  RecordGradient gradient(const Interaction& r) const {
    const auto u = static_cast<Eigen::Index>(r.user);
    const auto i = static_cast<Eigen::Index>(r.item);
    const double e = r.value - predict(r.user, r.item);
    const double l2 = hp_.l2_penalty;
    RecordGradient g;
    g.user_vector = -e * item_vectors_.row(i).transpose() + l2 * user_vectors_.row(u).transpose();
    g.item_vector = -e * user_vectors_.row(u).transpose() + l2 * item_vectors_.row(i).transpose();
    g.user_bias = -e + l2 * user_bias_(u);
    g.item_bias = -e + l2 * item_bias_(i);
    g.global_bias = -e;
    return g;
  }

  /// One simultaneous step: every touched parameter moves by -learning_rate * gradient.
  void sgd_step(const Interaction& r) {
    const auto g = gradient(r);
    const auto u = static_cast<Eigen::Index>(r.user);
    const auto i = static_cast<Eigen::Index>(r.item);
    const double lr = hp_.learning_rate;
    user_vectors_.row(u) -= lr * g.user_vector.transpose();
    item_vectors_.row(i) -= lr * g.item_vector.transpose();
    user_bias_(u) -= lr * g.user_bias;
    item_bias_(i) -= lr * g.item_bias;
    global_bias_ -= lr * g.global_bias;
  }

  /// One pass over `records` in a freshly shuffled order.
  void train_epoch(std::span<const Interaction> records, Rng& rng) {
    order_.resize(records.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    shuffle(order_.begin(), order_.end(), rng);
    for (auto idx : order_) sgd_step(records[idx]);
    if (!all_finite())
      throw Error(ErrorKind::runtime, "latent factor training diverged (non-finite parameters); lower learning_rate");
  }

  bool all_finite() const {
    return user_vectors_.allFinite() && item_vectors_.allFinite() && user_bias_.allFinite() && item_bias_.allFinite() &&
           std::isfinite(global_bias_);
  }

  const FactorMatrix& user_vectors() const noexcept { return user_vectors_; }
  const FactorMatrix& item_vectors() const noexcept { return item_vectors_; }
  const Eigen::VectorXd& user_bias() const noexcept { return user_bias_; }
  const Eigen::VectorXd& item_bias() const noexcept { return item_bias_; }
  double global_bias() const noexcept { return global_bias_; }

  FactorMatrix& user_vectors() noexcept { return user_vectors_; }
  FactorMatrix& item_vectors() noexcept { return item_vectors_; }
  Eigen::VectorXd& user_bias() noexcept { return user_bias_; }
  Eigen::VectorXd& item_bias() noexcept { return item_bias_; }
  void set_global_bias(double v) noexcept { global_bias_ = v; }

  // Checkpoint layout (text, one CSV record per line):
  //   ratelab-lf,1,<num_users>,<num_items>,<dim>
  //   hyper,<learning_rate>,<l2_penalty>,<epochs>,<init_scale>,<incremental>
  //   global,<global_bias>
  //   user,<index>,<bias>,<v_0>,...,<v_{dim-1}>      (num_users lines)
  //   item,<index>,<bias>,<v_0>,...,<v_{dim-1}>      (num_items lines)
  // Reals are written with 17 significant digits so a reload is exact.
  void save(std::ostream& os) const {
    const auto old_prec = os.precision(17);
    os << "ratelab-lf,1," << num_users() << ',' << num_items() << ',' << hp_.dim << '\n';
    os << "hyper," << hp_.learning_rate << ',' << hp_.l2_penalty << ',' << hp_.epochs << ',' << hp_.init_scale << ','
       << (hp_.incremental ? 1 : 0) << '\n';
    os << "global," << global_bias_ << '\n';
    auto dump = [&](std::string_view tag, const FactorMatrix& m, const Eigen::VectorXd& bias) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        os << tag << ',' << r << ',' << bias(r);
        for (Eigen::Index d = 0; d < m.cols(); ++d) os << ',' << m(r, d);
        os << '\n';
      }
    };
    dump("user", user_vectors_, user_bias_);
    dump("item", item_vectors_, item_bias_);
    os.precision(old_prec);
  }

  static LatentFactorModel load(std::istream& is) {
    auto fields = [](const std::string& line) {
      std::vector<std::string> out;
      std::stringstream ss(line);
      std::string f;
      while (std::getline(ss, f, ',')) out.push_back(f);
      return out;
    };
    auto next = [&](std::string_view tag, std::size_t min_fields) {
      std::string line;
      if (!std::getline(is, line)) throw DataError("checkpoint truncated before '" + std::string(tag) + "' record");
      auto f = fields(line);
      if (f.size() < min_fields || f[0] != tag) throw DataError("checkpoint: expected '" + std::string(tag) + "' record");
      return f;
    };
    try {
      auto head = next("ratelab-lf", 5);
      if (head[1] != "1") throw DataError("checkpoint: unsupported version " + head[1]);
      const auto users = std::stoull(head[2]);
      const auto items = std::stoull(head[3]);
      LatentFactorHyperparams hp;
      hp.dim = std::stoull(head[4]);
      auto hyper = next("hyper", 6);
      hp.learning_rate = std::stod(hyper[1]);
      hp.l2_penalty = std::stod(hyper[2]);
      hp.epochs = std::stoull(hyper[3]);
      hp.init_scale = std::stod(hyper[4]);
      hp.incremental = hyper[5] == "1";
      LatentFactorModel m(users, items, hp, 0);
      m.global_bias_ = std::stod(next("global", 2)[1]);
      auto read_rows = [&](std::string_view tag, FactorMatrix& mat, Eigen::VectorXd& bias) {
        for (Eigen::Index r = 0; r < mat.rows(); ++r) {
          auto f = next(tag, 3 + hp.dim);
          if (std::stoll(f[1]) != r) throw DataError("checkpoint: rows out of order");
          bias(r) = std::stod(f[2]);
          for (Eigen::Index d = 0; d < mat.cols(); ++d) mat(r, d) = std::stod(f[3 + static_cast<std::size_t>(d)]);
        }
      };
      read_rows("user", m.user_vectors_, m.user_bias_);
      read_rows("item", m.item_vectors_, m.item_bias_);
      return m;
    } catch (const std::logic_error& e) {  // stoull/stod failures
      throw DataError(std::string("checkpoint: malformed number (") + e.what() + ")");
    }
  }

 private:
  LatentFactorHyperparams hp_;
  FactorMatrix user_vectors_;
  FactorMatrix item_vectors_;
  Eigen::VectorXd user_bias_;
  Eigen::VectorXd item_bias_;
  double global_bias_ = 0.0;
  std::vector<std::size_t> order_;
};

class LatentFactorRecommender {
 public:
  LatentFactorRecommender(std::size_t num_users, std::size_t num_items, const LatentFactorHyperparams& hp,
                          std::uint64_t seed)
      : model_(num_users, num_items, hp, derive_seed(seed, "lf-init")), shuffle_rng_(substream(seed, "lf-shuffle")) {}

  /// Appends the batch to the accumulated ratings and runs `epochs` SGD passes
  /// over all of them (or over the batch alone in incremental mode).
  void update(std::span<const Interaction> batch) {
    detail::check_ids(batch, model_.num_users(), model_.num_items());
    history_.insert(history_.end(), batch.begin(), batch.end());
    const auto train_on = model_.hyperparams().incremental ? batch : std::span<const Interaction>(history_);
    for (std::size_t e = 0; e < model_.hyperparams().epochs; ++e) model_.train_epoch(train_on, shuffle_rng_);
  }

  std::size_t recommend(std::size_t user, ExclusionMask excluded, Rng&) const {
    detail::check_mask(excluded, model_.num_items());
    if (user >= model_.num_users()) throw IndexError("user index " + std::to_string(user) + " out of range");
    return detail::argmax_item(user, excluded, [&](std::size_t i) { return model_.predict(user, i); });
  }

  const LatentFactorModel& model() const noexcept { return model_; }
  LatentFactorModel& model() noexcept { return model_; }
  std::span<const Interaction> history() const noexcept { return history_; }

 private:
  LatentFactorModel model_;
  Rng shuffle_rng_;
  std::vector<Interaction> history_;
};

/// Type-erased state of any of the three policies.
class Recommender {
 public:
  using State = std::variant<RandomRecommender, TopPopRecommender, LatentFactorRecommender>;

  explicit Recommender(State state) : state_(std::move(state)) {}

  static Recommender create(RecommenderKind kind, std::size_t num_users, std::size_t num_items,
                            const LatentFactorHyperparams& hp, std::uint64_t seed) {
    if (num_users < 1 || num_items < 1) throw ConfigError("recommender needs >= 1 user and item");
    switch (kind) {
      case RecommenderKind::random: return Recommender(RandomRecommender(num_users, num_items));
      case RecommenderKind::toppop: return Recommender(TopPopRecommender(num_users, num_items));
      case RecommenderKind::latent_factor: return Recommender(LatentFactorRecommender(num_users, num_items, hp, seed));
    }
    throw ConfigError("unknown recommender kind");
  }

  RecommenderKind kind() const noexcept { return static_cast<RecommenderKind>(state_.index()); }

  void update(std::span<const Interaction> batch) {
    std::visit([&](auto& s) { s.update(batch); }, state_);
  }

  std::size_t recommend(std::size_t user, ExclusionMask excluded, Rng& rng) const {
    return std::visit([&](const auto& s) { return s.recommend(user, excluded, rng); }, state_);
  }

  const State& state() const noexcept { return state_; }
  State& state() noexcept { return state_; }

 private:
  State state_;
};

}  // namespace ratelab
