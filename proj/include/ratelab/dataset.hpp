#pragma once

// Rating records shared by simulated traces and ingested rating logs.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ratelab/env_model.hpp"
#include "ratelab/error.hpp"

namespace ratelab {

enum class Period : std::uint8_t { pre_timers, post_timers };
enum class RecommenderClass : std::uint8_t { personalized, random };

inline std::string_view to_string(Period p) noexcept { return p == Period::pre_timers ? "pre_timers" : "post_timers"; }

inline std::string_view to_string(RecommenderClass c) noexcept {
  return c == RecommenderClass::personalized ? "personalized" : "random";
}

inline std::string_view rating_name(Rating r) noexcept {
  switch (r) {
    case Rating::dislike: return "dislike";
    case Rating::like: return "like";
    case Rating::superlike: return "superlike";
  }
  return "?";
}

struct RatingRecord {
  std::string user_id;
  std::string item_id;
  Rating rating = Rating::dislike;
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  std::optional<Treatment> treatment;
  std::optional<Period> period;
  std::optional<RecommenderClass> recommender_class;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

/// Immutable record list with per-user and per-item indices (keys sorted).
class Dataset {
 public:
  using Index = std::map<std::string, std::vector<std::size_t>, std::less<>>;

  Dataset() = default;

  explicit Dataset(std::vector<RatingRecord> records) : records_(std::move(records)) {
    if (!records_.empty()) {
      has_treatment_ = records_.front().treatment.has_value();
      has_period_ = records_.front().period.has_value();
      has_class_ = records_.front().recommender_class.has_value();
    }
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (r.treatment.has_value() != has_treatment_ || r.period.has_value() != has_period_ ||
          r.recommender_class.has_value() != has_class_)
        throw DataError("record " + std::to_string(i) + ": optional fields must be present in all records or none");
      by_user_[r.user_id].push_back(i);
      by_item_[r.item_id].push_back(i);
    }
  }

  std::span<const RatingRecord> records() const noexcept { return records_; }
  const RatingRecord& operator[](std::size_t i) const { return records_.at(i); }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  const Index& by_user() const noexcept { return by_user_; }
  const Index& by_item() const noexcept { return by_item_; }

  bool has_treatment() const noexcept { return has_treatment_; }
  bool has_period() const noexcept { return has_period_; }
  bool has_recommender_class() const noexcept { return has_class_; }

  /// Records at `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices) const {
    std::vector<RatingRecord> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(records_.at(i));
    Dataset d(std::move(out));
    // keep schema flags for empty subsets
    if (d.empty()) {
      d.has_treatment_ = has_treatment_;
      d.has_period_ = has_period_;
      d.has_class_ = has_class_;
    }
    return d;
  }

  Dataset subset_where(const std::vector<bool>& keep) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < keep.size(); ++i)
      if (keep[i]) idx.push_back(i);
    return subset(idx);
  }

  friend bool operator==(const Dataset& a, const Dataset& b) { return a.records_ == b.records_; }

 private:
  std::vector<RatingRecord> records_;
  Index by_user_;
  Index by_item_;
  bool has_treatment_ = false;
  bool has_period_ = false;
  bool has_class_ = false;
};

}  // namespace ratelab
