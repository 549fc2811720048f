#pragma once

#include <array>
#include <cstddef>
#include <map>

#include "ratelab/env_model.hpp"
#include "ratelab/error.hpp"

namespace ratelab {

struct RatingFractions {
  double dislike = 0.0;
  double like = 0.0;
  double superlike = 0.0;

  double operator[](Rating r) const noexcept {
    switch (r) {
      case Rating::dislike: return dislike;
      case Rating::like: return like;
      case Rating::superlike: return superlike;
    }
    return 0.0;
  }
};

/// Per-option fractions computed within each user first, then averaged over
/// users with equal weight. `user_of` and `rating_of` project an element of
/// `records` onto its user key and Rating.
template <class Range, class UserOf, class RatingOf>
RatingFractions rating_fractions(const Range& records, UserOf user_of, RatingOf rating_of) {
  using Key = std::decay_t<decltype(user_of(*std::begin(records)))>;
  std::map<Key, std::array<std::size_t, 3>> per_user;
  for (const auto& rec : records) ++per_user[user_of(rec)][static_cast<std::size_t>(rating_of(rec))];
  if (per_user.empty()) throw EmptyInputError("rating fractions of an empty record set");

  std::array<double, 3> acc{0.0, 0.0, 0.0};
  for (const auto& [user, counts] : per_user) {
    const double n = static_cast<double>(counts[0] + counts[1] + counts[2]);
    for (std::size_t k = 0; k < 3; ++k) acc[k] += static_cast<double>(counts[k]) / n;
  }
  const double users = static_cast<double>(per_user.size());
  return {acc[0] / users, acc[1] / users, acc[2] / users};
}

}  // namespace ratelab
